//! Reference computations that do not go through the crate's quadrature.
#![allow(dead_code)]

use std::f64::consts::PI;

use udn_coverage::{AssociationPolicy, FadingModel, LosModel, NetworkConfig, PathLossModel, Scenario};

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `∫_a^∞ f` via `t = a + c·u/(1−u)`; `f` must decay faster than `t^{-2}`.
pub fn simpson_tail(f: impl Fn(f64) -> f64, a: f64, c: f64, n: usize) -> f64 {
    simpson(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let t = a + c * u / (1.0 - u);
            f(t) * c / ((1.0 - u) * (1.0 - u))
        },
        0.0,
        1.0,
        n,
    )
}

pub fn scenario(lambda: f64, association: AssociationPolicy, theta_db: f64, los: LosModel, m: u32) -> Scenario {
    Scenario::new(
        NetworkConfig::sir(lambda, association, theta_db).unwrap(),
        PathLossModel::single(4.0).unwrap(),
        los,
        FadingModel::nakagami(m).unwrap(),
    )
    .unwrap()
}

/// `1 − E[e^{−s h t^{−α}}]` averaged over the LOS mark, written directly
/// from the fading transforms.
/// `p_LOS` is read strictly inside `(lo, hi)` so a step at a piece boundary
/// takes the value of this piece.
fn one_minus_transform(scn: &Scenario, s: f64, t: f64, alpha: f64, mixed: bool, (lo, hi): (f64, f64)) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = s * t.powf(-alpha);
    let m = scn.fading.m as f64;
    let mut inside = t.max(lo + 1e-9 * (1.0 + lo));
    if hi.is_finite() {
        inside = inside.min(hi - 1e-9 * (1.0 + hi));
    }
    let p = if mixed { scn.los.probability(inside) } else { 0.0 };
    let nlos = x / (1.0 + x);
    let los = -(-m * (x / m).ln_1p()).exp_m1();
    p * los + (1.0 - p) * nlos
}

/// Interference transform as a product of per-segment factors, each with
/// its own exponent (the rule never sees the jump at a transition).
pub fn laplace_oracle(scn: &Scenario, s: f64, r: f64, mixed: bool) -> f64 {
    let lower = match scn.net.association {
        AssociationPolicy::Closest => r,
        AssociationPolicy::Strongest => 0.0,
    };
    let mut cuts: Vec<f64> = scn.pl.transitions().to_vec();
    if mixed {
        match scn.los {
            LosModel::Umi { d1, .. } => cuts.push(d1),
            LosModel::Step(d) => cuts.push(d),
            _ => {}
        }
    }
    cuts.retain(|&c| c > lower);
    cuts.sort_by(f64::total_cmp);
    let mut factor = 1.0;
    let mut a = lower;
    for c in cuts {
        let alpha = scn.pl.exponent_at(0.5 * (a + c));
        let piece = simpson(|t| one_minus_transform(scn, s, t, alpha, mixed, (a, c)) * t, a, c, 20_000);
        factor *= (-2.0 * PI * scn.net.lambda * piece).exp();
        a = c;
    }
    let alpha = scn.pl.far_field_exponent();
    let scale = a.max(s.powf(1.0 / alpha)).max(1e-3);
    let piece = simpson_tail(|t| one_minus_transform(scn, s, t, alpha, mixed, (a, f64::INFINITY)) * t, a, scale, 200_000);
    factor * (-2.0 * PI * scn.net.lambda * piece).exp()
}

/// NLOS transform for `α = 4` in closed form:
/// `exp(−πλ√s (π/2 − arctan(ν²/√s)))`.
pub fn laplace_nlos_alpha4(lambda: f64, s: f64, nu: f64) -> f64 {
    let q = s.sqrt();
    (-PI * lambda * q * (PI / 2.0 - (nu * nu / q).atan())).exp()
}

/// Closest/NLOS/`α = 4` coverage `1/(1 + √θ arctan √θ)`.
pub fn closest_nlos_alpha4(theta: f64) -> f64 {
    1.0 / (1.0 + theta.sqrt() * theta.sqrt().atan())
}

/// Strongest/NLOS/`α = 4` coverage `2/(π√θ)`.
pub fn strongest_nlos_alpha4(theta: f64) -> f64 {
    2.0 / (PI * theta.sqrt())
}
