//! Coverage probability from the Laplace functional of the interference.
//!
//! Conditioned on a serving distance `r`, a Rayleigh serving link is covered
//! with probability `L_I(θ r^α)`; a Nakagami-m serving link with
//! `Υ(θ r^α) = Σ_{k<m} (−s)^k/k! · L_I^{(k)}(s)` at `s = mθ r^α`. Both are
//! averaged against the association kernel `φ(r)`.

mod derivatives;
mod laplace;

pub use derivatives::{exp_derivatives, exp_taylor};

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{AssociationPolicy, FadingModel, LosModel, NetworkConfig, PathLossModel};
use crate::quadrature::{integrate_finite_vec, integrate_semi_infinite_vec, QuadSpec, Quadrature};
use laplace::{ExponentEngine, Interferers};

/// Closest association integrates the serving distance up to `πλr² = 40`;
/// the neglected mass is `e^{−40} ≈ 4e−18`.
const CLOSEST_TRUNCATION: f64 = 40.0;

/// Full parameterisation of one coverage evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub net: NetworkConfig,
    pub pl: PathLossModel,
    pub los: LosModel,
    pub fading: FadingModel,
}

impl Scenario {
    pub fn new(net: NetworkConfig, pl: PathLossModel, los: LosModel, fading: FadingModel) -> Result<Self> {
        let scn = Scenario { net, pl, los, fading };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.los.validate()?;
        if self.fading.m == 0 {
            return Err(Error::InvalidParameter("Nakagami shape m must be >= 1".into()));
        }
        if self.net.association == AssociationPolicy::Strongest && self.pl.far_field_exponent() <= 2.0 {
            return Err(Error::InvalidParameter(format!(
                "strongest association needs a far-field path loss exponent > 2, got {}",
                self.pl.far_field_exponent()
            )));
        }
        Ok(())
    }

    pub fn with_los(&self, los: LosModel) -> Self {
        Scenario { los, ..self.clone() }
    }

    pub fn with_fading(&self, fading: FadingModel) -> Self {
        Scenario { fading, ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut s = self.clone();
        s.net.lambda = lambda;
        s
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        let mut s = self.clone();
        s.net.theta = theta;
        s
    }

    pub fn with_association(&self, association: AssociationPolicy) -> Self {
        let mut s = self.clone();
        s.net.association = association;
        s
    }

    /// Serving-link Laplace argument `θ r^{α(r)}` (before the factor m).
    fn serving_arg(&self, r: f64) -> f64 {
        self.net.theta * r.powf(self.pl.exponent_at(r))
    }
}

/// Interference transform value `L_I(s)` conditioned on serving distance `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceEvaluation {
    pub s: f64,
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    UpperBound,
    LowDensityLimit,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::UpperBound => "upper_bound",
            Method::LowDensityLimit => "low_density_limit",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoverageFlags {
    /// Strongest association with `θ < 1`: the expected number of covering
    /// BSs is reported and may exceed one.
    pub exceeds_one: bool,
    /// Upper bound larger than one, reported unclamped.
    pub upper_bound_unclamped: bool,
    /// Alternating binomial sum lost most of its significant digits.
    pub cancellation_loss: bool,
}

impl CoverageFlags {
    pub fn is_empty(&self) -> bool {
        !(self.exceeds_one || self.upper_bound_unclamped || self.cancellation_loss)
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.exceeds_one {
            out.push("ExceedsOne");
        }
        if self.upper_bound_unclamped {
            out.push("UpperBoundUnclamped");
        }
        if self.cancellation_loss {
            out.push("CancellationLoss");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageResult {
    pub pcov: f64,
    pub method: Method,
    /// Accumulated error estimate of the outer integrals.
    pub quad_error: f64,
    pub flags: CoverageFlags,
}

/// Analytic coverage engine.
///
/// Noise is ignored unless enabled with [`Analytic::with_noise`]; when on,
/// the transform gains the factor `e^{−sσ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Analytic {
    pub quad: QuadSpec,
    pub include_noise: bool,
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for t in terms {
        let next = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - next) + t;
        } else {
            comp += (t - next) + sum;
        }
        sum = next;
    }
    sum + comp
}

impl Analytic {
    pub fn new(quad: QuadSpec) -> Self {
        Analytic {
            quad,
            include_noise: false,
        }
    }

    pub fn with_noise(mut self, include_noise: bool) -> Self {
        self.include_noise = include_noise;
        self
    }

    // inner integrals run two orders tighter than the outer one so their
    // noise does not pollute the outer error estimate
    fn engine<'a>(&self, scn: &'a Scenario) -> ExponentEngine<'a> {
        ExponentEngine {
            scn,
            quad: self.quad.scaled(1e-2),
            include_noise: self.include_noise,
        }
    }

    fn check_args(s: f64, r: f64) -> Result<()> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidParameter(format!("Laplace argument s must be >= 0, got {s}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter(format!("serving distance r must be >= 0, got {r}")));
        }
        Ok(())
    }

    /// Interference transform when every BS is NLOS (Rayleigh).
    pub fn laplace_nlos(&self, scn: &Scenario, s: f64, r: f64) -> Result<LaplaceEvaluation> {
        Self::check_args(s, r)?;
        let lower = scn.net.kernels().lower_limit(r);
        let eta = self.engine(scn).exponent(lower, s, Interferers::Nlos)?;
        Ok(LaplaceEvaluation { s, r, value: eta.exp() })
    }

    /// Interference transform with distance-dependent LOS/NLOS interferers.
    pub fn laplace_los(&self, scn: &Scenario, s: f64, r: f64) -> Result<LaplaceEvaluation> {
        Self::check_args(s, r)?;
        let lower = scn.net.kernels().lower_limit(r);
        let eta = self.engine(scn).exponent(lower, s, Interferers::Mixed)?;
        Ok(LaplaceEvaluation { s, r, value: eta.exp() })
    }

    /// Segment-product NLOS transform; the integration range is split at
    /// every transition distance beyond `ν(r)`.
    pub fn laplace_nlos_multislope(&self, scn: &Scenario, s: f64, r: f64) -> Result<LaplaceEvaluation> {
        self.laplace_nlos(scn, s, r)
    }

    pub fn laplace_los_multislope(&self, scn: &Scenario, s: f64, r: f64) -> Result<LaplaceEvaluation> {
        self.laplace_los(scn, s, r)
    }

    /// `d^k/ds^k L_I^LOS(s)` for `k = 0..=k_max`, `k_max < m`.
    pub fn laplace_los_derivatives(&self, scn: &Scenario, s: f64, r: f64, k_max: usize) -> Result<Vec<f64>> {
        if k_max >= scn.fading.m as usize {
            return Err(Error::OrderTooHigh {
                order: k_max,
                m: scn.fading.m,
            });
        }
        Self::check_args(s, r)?;
        if s <= 0.0 {
            return Err(Error::InvalidParameter("derivatives need s > 0".into()));
        }
        let lower = scn.net.kernels().lower_limit(r);
        let g = self.engine(scn).coefficients(lower, s, k_max, Interferers::Mixed)?;
        // g_j = η^{(j)} (−s)^j / j!
        let mut eta = Vec::with_capacity(g.len());
        let mut scale = 1.0;
        for (j, gj) in g.iter().enumerate() {
            if j > 0 {
                scale *= -s / j as f64;
            }
            eta.push(gj / scale);
        }
        Ok(exp_derivatives(&eta))
    }

    /// `E_I[F̄_LOS(zI)]`: probability that a Nakagami-m serving link at
    /// distance `r` beats `z` times the interference.
    pub fn upsilon_los(&self, scn: &Scenario, z: f64, r: f64) -> Result<f64> {
        Self::check_args(z, r)?;
        let lower = scn.net.kernels().lower_limit(r);
        self.upsilon_at(scn, lower, z)
    }

    fn upsilon_at(&self, scn: &Scenario, lower: f64, z: f64) -> Result<f64> {
        let m = scn.fading.m as usize;
        let s = m as f64 * z;
        let g = self.engine(scn).coefficients(lower, s, m - 1, Interferers::Mixed)?;
        Ok(exp_taylor(&g).iter().sum::<f64>().min(1.0))
    }

    /// Serving-distance pieces `[a, b)` over `[lo, hi)`, split at path-loss
    /// and LOS breakpoints; Closest stops at the Gaussian truncation radius.
    fn outer_pieces(&self, scn: &Scenario, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let lambda = scn.net.lambda;
        let hi = match scn.net.association {
            AssociationPolicy::Closest => hi.min((CLOSEST_TRUNCATION / (PI * lambda)).sqrt()),
            AssociationPolicy::Strongest => hi,
        };
        let mut cuts: Vec<f64> = scn.pl.transitions().to_vec();
        cuts.extend(scn.los.breakpoints());
        cuts.retain(|&c| c > lo && c < hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut pieces = Vec::new();
        let mut a = lo;
        for c in cuts {
            pieces.push((a, c));
            a = c;
        }
        if hi > a {
            pieces.push((a, hi));
        }
        pieces
    }

    /// `∫_lo^hi f(r) dr` over the outer pieces; `f` may fail.
    fn integrate_outer<F>(&self, scn: &Scenario, lo: f64, hi: f64, mut f: F) -> Result<Quadrature>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut failure: Option<Error> = None;
        let mut value = 0.0;
        let mut error = 0.0;
        let scale = 1.0 / (PI * scn.net.lambda).sqrt();
        for (a, b) in self.outer_pieces(scn, lo, hi) {
            let mut eval = |r: f64, out: &mut [f64]| {
                out[0] = if failure.is_some() {
                    0.0
                } else {
                    match f(r) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                };
            };
            let res = if b.is_finite() {
                integrate_finite_vec(&mut eval, a, b, 1, &self.quad)
            } else {
                // Laplace exponent grows like λr², so the integrand decays
                // faster than any power
                integrate_semi_infinite_vec(&mut eval, a, scale.max(a), 1, &self.quad, Some(3.0))
            };
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let res = res?;
            value += res.values[0];
            error += res.errors[0];
        }
        Ok(Quadrature { value, error })
    }

    fn finish(scn: &Scenario, q: Quadrature, method: Method) -> CoverageResult {
        let mut flags = CoverageFlags::default();
        if scn.net.association == AssociationPolicy::Strongest && q.value > 1.0 {
            flags.exceeds_one = true;
        }
        CoverageResult {
            pcov: q.value,
            method,
            quad_error: q.error,
            flags,
        }
    }

    /// Coverage when every link is NLOS: `∫ L_I^NLOS(θ r^α | r) φ(r) dr`.
    pub fn coverage_nlos(&self, scn: &Scenario) -> Result<CoverageResult> {
        let q = self.nlos_part(scn, 0.0, f64::INFINITY)?;
        Ok(Self::finish(scn, q, Method::Exact))
    }

    fn nlos_part(&self, scn: &Scenario, lo: f64, hi: f64) -> Result<Quadrature> {
        let kernels = scn.net.kernels();
        let engine = self.engine(scn);
        self.integrate_outer(scn, lo, hi, |r| {
            let w = kernels.weight(r);
            if w == 0.0 {
                return Ok(0.0);
            }
            let eta = engine.exponent(kernels.lower_limit(r), scn.serving_arg(r), Interferers::Nlos)?;
            Ok(eta.exp() * w)
        })
    }

    /// General LOS/NLOS coverage:
    /// `P^NLOS + ∫ p_LOS(r)(Υ_LOS(θ r^α | r) − L_I^NLOS(θ r^α | r)) φ(r) dr`.
    ///
    /// Works for single- and multi-slope path loss; on segment `n` the
    /// serving argument is `θ r^{α_n}`.
    pub fn coverage(&self, scn: &Scenario) -> Result<CoverageResult> {
        let nlos = self.nlos_part(scn, 0.0, f64::INFINITY)?;
        if scn.los.is_none() {
            return Ok(Self::finish(scn, nlos, Method::Exact));
        }
        let support = match scn.los {
            LosModel::Step(d) => d,
            _ => f64::INFINITY,
        };
        let kernels = scn.net.kernels();
        let engine = self.engine(scn);
        let correction = self.integrate_outer(scn, 0.0, support, |r| {
            let p = scn.los.probability(r);
            let w = kernels.weight(r);
            if p == 0.0 || w == 0.0 {
                return Ok(0.0);
            }
            let lower = kernels.lower_limit(r);
            let z = scn.serving_arg(r);
            let upsilon = self.upsilon_at(scn, lower, z)?;
            let l_nlos = engine.exponent(lower, z, Interferers::Nlos)?.exp();
            Ok(p * (upsilon - l_nlos) * w)
        })?;
        let q = Quadrature {
            value: nlos.value + correction.value,
            error: nlos.error + correction.error,
        };
        Ok(Self::finish(scn, q, Method::Exact))
    }

    pub fn coverage_multislope(&self, scn: &Scenario) -> Result<CoverageResult> {
        self.coverage(scn)
    }

    fn step_distance(scn: &Scenario) -> Result<f64> {
        match scn.los {
            LosModel::Step(d) => Ok(d),
            _ => Err(Error::Unsupported("a step LOS model")),
        }
    }

    /// Coverage under the step LOS model:
    /// `∫_D^∞ L_I^NLOS(θ r^α) φ dr + ∫_0^D Υ̃(θ r^α) φ dr`, where the
    /// transform inside `Υ̃` has Nakagami-m interferers on `[ν(r), D]` and
    /// Rayleigh interferers beyond `D`.
    pub fn coverage_step_simplified(&self, scn: &Scenario) -> Result<CoverageResult> {
        let d = Self::step_distance(scn)?;
        let far = self.nlos_part(scn, d, f64::INFINITY)?;
        let kernels = scn.net.kernels();
        let near = self.integrate_outer(scn, 0.0, d, |r| {
            let w = kernels.weight(r);
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(self.upsilon_at(scn, kernels.lower_limit(r), scn.serving_arg(r))? * w)
        })?;
        let q = Quadrature {
            value: far.value + near.value,
            error: far.error + near.error,
        };
        Ok(Self::finish(scn, q, Method::Exact))
    }

    /// Low-density limit of the step-model coverage: the all-NLOS coverage.
    pub fn coverage_low_density_limit(&self, scn: &Scenario) -> Result<CoverageResult> {
        let mut res = self.coverage_nlos(scn)?;
        res.method = Method::LowDensityLimit;
        Ok(res)
    }

    /// Derivative-free upper bound on the step-model coverage.
    ///
    /// The LOS term is replaced by `Σ_{k=1}^{m} (−1)^{k+1} C(m,k) L̃(c·k·m·θ r^α)`
    /// with `c = Γ(m+1)^{−1/m}`.
    pub fn coverage_upper_bound(&self, scn: &Scenario) -> Result<CoverageResult> {
        let d = Self::step_distance(scn)?;
        let m = scn.fading.m;
        let far = self.nlos_part(scn, d, f64::INFINITY)?;

        let ln_gamma = (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
        let c = (-ln_gamma / m as f64).exp();
        let mut binom = Vec::with_capacity(m as usize);
        let mut b = 1.0f64;
        for k in 1..=m {
            b = b * (m - k + 1) as f64 / k as f64;
            binom.push(b);
        }

        // the alternating sum amplifies transform errors by up to C(m, m/2)
        let mut tight = self.quad.scaled(1e-5);
        tight.abs_tol = tight.abs_tol.min(1e-16);
        let engine = ExponentEngine {
            scn,
            quad: tight,
            include_noise: self.include_noise,
        };
        let kernels = scn.net.kernels();
        let mut cancellation = false;
        let near = self.integrate_outer(scn, 0.0, d, |r| {
            let w = kernels.weight(r);
            if w == 0.0 {
                return Ok(0.0);
            }
            let z = scn.serving_arg(r);
            let ss: Vec<f64> = (1..=m).map(|k| c * (k * m) as f64 * z).collect();
            let etas = engine.exponents(kernels.lower_limit(r), &ss, Interferers::Mixed)?;
            let terms: Vec<f64> = etas
                .iter()
                .zip(&binom)
                .enumerate()
                .map(|(i, (eta, b))| if i % 2 == 0 { b * eta.exp() } else { -b * eta.exp() })
                .collect();
            let sum = compensated_sum(terms.iter().copied());
            let largest = terms.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
            if sum.abs() < 1e-10 * largest {
                cancellation = true;
            }
            Ok(sum * w)
        })?;
        let pcov = far.value + near.value;
        let flags = CoverageFlags {
            cancellation_loss: cancellation,
            upper_bound_unclamped: pcov > 1.0,
            ..CoverageFlags::default()
        };
        Ok(CoverageResult {
            pcov,
            method: Method::UpperBound,
            quad_error: far.error + near.error,
            flags,
        })
    }
}
