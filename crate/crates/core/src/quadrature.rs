//! Adaptive 21-point Gauss–Kronrod integration.
//!
//! The driver works on vector-valued integrands so that families of related
//! integrals (all derivative orders of one Laplace exponent, say) share a
//! single subdivision. A component converges once its accumulated error is
//! below `max(abs_tol, rel_tol·|I|)`, floored at about 100 ulp of
//! `∫|f|`; the panel with the worst
//! error-to-tolerance ratio is bisected next.

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_478_160,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadSpec {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "quadrature tolerances must be > 0".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidParameter(
                "max_subdivisions must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Same subdivision budget with both tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        QuadSpec {
            rel_tol: (self.rel_tol * factor).max(1e-14),
            abs_tol: (self.abs_tol * factor).max(f64::MIN_POSITIVE),
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureVec {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    resabs: Vec<f64>,
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

struct Kronrod {
    fv: Vec<Vec<f64>>,
}

impl Kronrod {
    fn new(dim: usize) -> Self {
        Kronrod {
            fv: vec![vec![0.0; dim]; 21],
        }
    }

    fn apply<F>(&mut self, f: &mut F, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)>
    where
        F: FnMut(f64, &mut [f64]),
    {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let dim = self.fv[0].len();

        // node layout: fv[0] centre, fv[2j+1] / fv[2j+2] the pair ±XGK[j]
        f(center, &mut self.fv[0]);
        for j in 0..10 {
            let dx = half * XGK[j];
            let (lo, hi) = self.fv.split_at_mut(2 * j + 2);
            f(center - dx, &mut lo[2 * j + 1]);
            f(center + dx, &mut hi[0]);
        }

        let mut values = vec![0.0; dim];
        let mut errors = vec![0.0; dim];
        let mut abs = vec![0.0; dim];
        for c in 0..dim {
            let fc = self.fv[0][c];
            let mut kron = WGK[10] * fc;
            let mut gauss = 0.0;
            let mut resabs = WGK[10] * fc.abs();
            for j in 0..10 {
                let f1 = self.fv[2 * j + 1][c];
                let f2 = self.fv[2 * j + 2][c];
                kron += WGK[j] * (f1 + f2);
                resabs += WGK[j] * (f1.abs() + f2.abs());
                if j % 2 == 1 {
                    gauss += WG[j / 2] * (f1 + f2);
                }
            }
            let mean = 0.5 * kron;
            let mut resasc = WGK[10] * (fc - mean).abs();
            for (j, w) in WGK.iter().take(10).enumerate() {
                resasc += w
                    * ((self.fv[2 * j + 1][c] - mean).abs() + (self.fv[2 * j + 2][c] - mean).abs());
            }
            if !kron.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "integrand is not finite on [{a}, {b}]"
                )));
            }
            values[c] = kron * half;
            abs[c] = resabs * half.abs();
            errors[c] = rescale_error(
                (kron - gauss) * half,
                resabs * half.abs(),
                resasc * half.abs(),
            );
        }
        Ok((values, errors, abs))
    }
}

/// Adaptive integration of a `dim`-component integrand over `[a, b]`.
pub fn integrate_finite_vec<F>(mut f: F, a: f64, b: f64, dim: usize, spec: &QuadSpec) -> Result<QuadratureVec>
where
    F: FnMut(f64, &mut [f64]),
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidParameter(format!(
            "finite integration needs a <= b, both finite; got [{a}, {b}]"
        )));
    }
    if a == b || dim == 0 {
        return Ok(QuadratureVec {
            values: vec![0.0; dim],
            errors: vec![0.0; dim],
        });
    }

    let mut rule = Kronrod::new(dim);
    let (values, errors, resabs) = rule.apply(&mut f, a, b)?;
    let mut panels = vec![Panel {
        a,
        b,
        values,
        errors,
        resabs,
    }];

    loop {
        let mut total = vec![0.0; dim];
        let mut err = vec![0.0; dim];
        let mut mass = vec![0.0; dim];
        for p in &panels {
            for c in 0..dim {
                total[c] += p.values[c];
                err[c] += p.errors[c];
                mass[c] += p.resabs[c];
            }
        }
        // below ~100 ulp of ∫|f| the error estimate is pure roundoff
        let tol: Vec<f64> = total
            .iter()
            .zip(&mass)
            .map(|(v, m)| {
                spec.abs_tol
                    .max(spec.rel_tol * v.abs())
                    .max(100.0 * f64::EPSILON * m)
            })
            .collect();
        if err.iter().zip(&tol).all(|(e, t)| e <= t) {
            return Ok(QuadratureVec {
                values: total,
                errors: err,
            });
        }
        if panels.len() >= spec.max_subdivisions {
            let worst = (0..dim)
                .max_by(|&i, &j| (err[i] / tol[i]).total_cmp(&(err[j] / tol[j])))
                .unwrap_or(0);
            return Err(Error::NonConvergence {
                a,
                b,
                subdivisions: panels.len(),
                value: total[worst],
                error: err[worst],
            });
        }

        let mut pick = None;
        let mut worst_ratio = 0.0;
        for (i, p) in panels.iter().enumerate() {
            let mid = 0.5 * (p.a + p.b);
            if !(mid > p.a && mid < p.b) {
                continue;
            }
            let ratio = p
                .errors
                .iter()
                .zip(&tol)
                .map(|(e, t)| e / t)
                .fold(0.0, f64::max);
            if ratio > worst_ratio {
                worst_ratio = ratio;
                pick = Some(i);
            }
        }
        let Some(i) = pick else {
            // every remaining panel is at floating-point resolution
            return Ok(QuadratureVec {
                values: total,
                errors: err,
            });
        };

        let p = panels.swap_remove(i);
        let mid = 0.5 * (p.a + p.b);
        let (lv, le, la) = rule.apply(&mut f, p.a, mid)?;
        let (rv, re, ra) = rule.apply(&mut f, mid, p.b)?;
        panels.push(Panel {
            a: p.a,
            b: mid,
            values: lv,
            errors: le,
            resabs: la,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            values: rv,
            errors: re,
            resabs: ra,
        });
    }
}

/// Adaptive integration of a scalar function over `[a, b]`.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let r = integrate_finite_vec(|x, out: &mut [f64]| out[0] = f(x), a, b, 1, spec)?;
    Ok(Quadrature {
        value: r.values[0],
        error: r.errors[0],
    })
}

fn check_tail<F>(f: &mut F, a: f64, scale: f64, dim: usize, hint: Option<f64>) -> Result<()>
where
    F: FnMut(f64, &mut [f64]),
{
    if let Some(p) = hint {
        if p <= 1.0 {
            return Err(Error::DivergentTail {
                from: a,
                reason: format!("integrand decays like t^-{p}, which is not integrable"),
            });
        }
        return Ok(());
    }
    // t·|f(t)| must shrink for an integrable power-law tail
    let t_near = a + scale * 1e2;
    let t_far = a + scale * 1e10;
    let mut near = vec![0.0; dim];
    let mut far = vec![0.0; dim];
    f(t_near, &mut near);
    f(t_far, &mut far);
    for c in 0..dim {
        let g_near = near[c].abs() * t_near;
        let g_far = far[c].abs() * t_far;
        if !g_far.is_finite() || (g_near > 1e-300 && g_far > 0.5 * g_near) {
            return Err(Error::DivergentTail {
                from: a,
                reason: format!(
                    "t·|f(t)| does not decay (component {c}: {g_near:e} at t = {t_near:e}, {g_far:e} at t = {t_far:e})"
                ),
            });
        }
    }
    Ok(())
}

/// `∫_a^∞` of a vector integrand through `t = a + scale·u/(1−u)`.
///
/// `tail_decay_hint = Some(p)` asserts `|f(t)| = O(t^-p)`; `p ≤ 1` is
/// rejected as divergent. Without a hint the tail is sampled.
pub fn integrate_semi_infinite_vec<F>(
    mut f: F,
    a: f64,
    scale: f64,
    dim: usize,
    spec: &QuadSpec,
    tail_decay_hint: Option<f64>,
) -> Result<QuadratureVec>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "semi-infinite integration needs a finite a >= 0, got {a}"
        )));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "substitution scale must be > 0, got {scale}"
        )));
    }
    check_tail(&mut f, a, scale, dim, tail_decay_hint)?;
    integrate_finite_vec(
        |u, out: &mut [f64]| {
            let w = 1.0 - u;
            let t = a + scale * u / w;
            f(t, out);
            let jac = scale / (w * w);
            for v in out.iter_mut() {
                *v *= jac;
            }
        },
        0.0,
        1.0,
        dim,
        spec,
    )
}

pub fn integrate_semi_infinite_scaled<F>(
    f: F,
    a: f64,
    scale: f64,
    spec: &QuadSpec,
    tail_decay_hint: Option<f64>,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let r = integrate_semi_infinite_vec(
        |t, out: &mut [f64]| out[0] = f(t),
        a,
        scale,
        1,
        spec,
        tail_decay_hint,
    )?;
    Ok(Quadrature {
        value: r.values[0],
        error: r.errors[0],
    })
}

/// `∫_a^∞ f` via `t = a + u/(1−u)`, `u ∈ [0, 1)`.
pub fn integrate_semi_infinite<F>(
    f: F,
    a: f64,
    spec: &QuadSpec,
    tail_decay_hint: Option<f64>,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    integrate_semi_infinite_scaled(f, a, 1.0, spec, tail_decay_hint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rational(t: f64) -> f64 {
        (1.0 - 1.0 / (1.0 + t.powi(-4))) * t
    }

    // antiderivative of t^-3/(1 + t^-4) = t/(t^4 + 1) is arctan(t²)/2
    fn rational_primitive(t: f64) -> f64 {
        0.5 * (t * t).atan()
    }

    #[test]
    fn finite_examples() {
        let spec = QuadSpec::default();
        let r = integrate_finite(|t| t, 0.0, 1.0, &spec).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-14);
        let r = integrate_finite(|_| 0.0, -3.0, 7.0, &spec).unwrap();
        assert_eq!(r.value, 0.0);
        let exact = rational_primitive(10.0) - rational_primitive(1.0);
        let r = integrate_finite(rational, 1.0, 10.0, &spec).unwrap();
        assert_abs_diff_eq!(r.value, exact, epsilon = 1e-10);
        assert_abs_diff_eq!(r.value, 0.3876992, epsilon = 1e-7);
        assert!(r.error >= (r.value - exact).abs());
    }

    #[test]
    fn semi_infinite_examples() {
        let spec = QuadSpec::default();
        let r = integrate_semi_infinite(|t| (-t).exp(), 0.0, &spec, None).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-10);
        let r = integrate_semi_infinite(rational, 1.0, &spec, Some(3.0)).unwrap();
        assert_abs_diff_eq!(r.value, PI / 8.0, epsilon = 1e-9);
        let r = integrate_semi_infinite(|t| t.powi(-3), 2.0, &spec, None).unwrap();
        assert_abs_diff_eq!(r.value, 0.125, epsilon = 1e-10);
    }

    #[test]
    fn divergent_tails_are_rejected() {
        let spec = QuadSpec::default();
        let err = integrate_semi_infinite(|t| 1.0 / (1.0 + t), 0.0, &spec, None).unwrap_err();
        assert!(matches!(err, Error::DivergentTail { .. }));
        let err = integrate_semi_infinite(|t| t.powf(-0.9), 1.0, &spec, None).unwrap_err();
        assert!(matches!(err, Error::DivergentTail { .. }));
        let err = integrate_semi_infinite(|t| t.powi(-3), 1.0, &spec, Some(1.0)).unwrap_err();
        assert!(matches!(err, Error::DivergentTail { .. }));
    }

    #[test]
    fn exhausted_budget_reports_nonconvergence() {
        let spec = QuadSpec::new(1e-12, 1e-14, 3).unwrap();
        let err = integrate_finite(|t| (1.0 / t).sin() / t, 1e-3, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn rejects_reversed_interval_and_bad_spec() {
        let spec = QuadSpec::default();
        assert!(integrate_finite(|t| t, 1.0, 0.0, &spec).is_err());
        assert!(QuadSpec::new(0.0, 1e-12, 10).is_err());
        assert!(QuadSpec::new(1e-8, 1e-12, 0).is_err());
    }

    #[test]
    fn error_estimate_bounds_true_error() {
        let spec = QuadSpec::default();
        type Case = (Box<dyn Fn(f64) -> f64>, f64, f64, f64);
        let cases: Vec<Case> = vec![
            (Box::new(|t: f64| t.sqrt()), 0.0, 1.0, 2.0 / 3.0),
            (Box::new(|t: f64| t.ln()), 1e-300, 1.0, -1.0),
            (Box::new(|t: f64| (10.0 * t).cos()), 0.0, PI, 0.0),
            (Box::new(|t: f64| 1.0 / (1.0 + 25.0 * t * t)), -1.0, 1.0, 0.4 * 5f64.atan()),
            (Box::new(|t: f64| (-t * t).exp()), -8.0, 8.0, PI.sqrt()),
        ];
        for (f, a, b, exact) in cases {
            let r = integrate_finite(f, a, b, &spec).unwrap();
            assert!(
                r.error >= (r.value - exact).abs(),
                "estimate {} below true error {}",
                r.error,
                (r.value - exact).abs()
            );
        }
    }

    #[test]
    fn substitution_matches_transformed_finite_integral() {
        let spec = QuadSpec::default();
        let a = 1.5;
        let f = |t: f64| t * (1.0 + t * t).powi(-3);
        let direct = integrate_semi_infinite(f, a, &spec, None).unwrap();
        let transformed = integrate_finite(
            |u| {
                let w = 1.0 - u;
                f(a + u / w) / (w * w)
            },
            0.0,
            1.0,
            &spec,
        )
        .unwrap();
        assert_abs_diff_eq!(direct.value, transformed.value, epsilon = 1e-12);
        // closed form: 1/(4(1 + a²)²)
        assert_abs_diff_eq!(direct.value, 0.25 / (1.0 + a * a).powi(2), epsilon = 1e-10);
    }

    #[test]
    fn vector_components_converge_independently() {
        let spec = QuadSpec::default();
        let r = integrate_finite_vec(
            |t, out: &mut [f64]| {
                out[0] = t;
                out[1] = t.sin();
                out[2] = 1e-9 * t.exp();
            },
            0.0,
            2.0,
            3,
            &spec,
        )
        .unwrap();
        assert_abs_diff_eq!(r.values[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.values[1], 1.0 - 2f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.values[2], 1e-9 * (2f64.exp() - 1.0), epsilon = 1e-17);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn linearity(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, k in 0.1f64..4.0, w in 0.5f64..6.0) {
            let spec = QuadSpec::default();
            let f = |t: f64| (k * t).sin() + t * t;
            let g = |t: f64| (-(t - 1.0).powi(2) * w).exp();
            let lhs = integrate_finite(|t| c1 * f(t) + c2 * g(t), -1.0, 2.5, &spec).unwrap().value;
            let rf = integrate_finite(f, -1.0, 2.5, &spec).unwrap().value;
            let rg = integrate_finite(g, -1.0, 2.5, &spec).unwrap().value;
            let rhs = c1 * rf + c2 * rg;
            prop_assert!((lhs - rhs).abs() <= 10.0 * spec.rel_tol * (c1.abs() * rf.abs() + c2.abs() * rg.abs()).max(1e-3));
        }
    }
}
