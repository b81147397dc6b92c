//! Network, propagation and fading descriptions shared by the analytic
//! engine and the simulator.
//!
//! Base stations form a homogeneous PPP of density `lambda` (BS/m²) around a
//! typical user at the origin. Every BS transmits unit power; the received
//! power from a BS at distance `r` is `h · ℓ(r)`, with `h` a unit-mean fading
//! gain that is Gamma(m, 1/m) under LOS and Exp(1) under NLOS. Each BS is LOS
//! independently with probability `p_LOS(r)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssociationPolicy {
    /// Served by the nearest BS.
    Closest,
    /// Covered if any BS achieves the threshold (max-SIR association).
    Strongest,
}

impl AssociationPolicy {
    pub fn kernels(self, lambda: f64) -> AssociationKernels {
        AssociationKernels {
            policy: self,
            lambda,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AssociationPolicy::Closest => "closest",
            AssociationPolicy::Strongest => "strongest",
        }
    }
}

impl fmt::Display for AssociationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssociationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "closest" => Ok(AssociationPolicy::Closest),
            "strongest" => Ok(AssociationPolicy::Strongest),
            other => Err(Error::InvalidParameter(format!(
                "unknown association policy '{other}' (expected closest|strongest)"
            ))),
        }
    }
}

/// Serving-distance weight `φ(r)` and interferer lower limit `ν(r)`.
///
/// Closest: `φ(r) = 2πλ r e^{-πλr²}` (nearest-neighbour pdf), `ν(r) = r`.
/// Strongest: `φ(r) = 2πλ r` (intensity measure), `ν(r) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationKernels {
    pub policy: AssociationPolicy,
    pub lambda: f64,
}

impl AssociationKernels {
    pub fn weight(&self, r: f64) -> f64 {
        let base = 2.0 * PI * self.lambda * r;
        match self.policy {
            AssociationPolicy::Closest => base * (-PI * self.lambda * r * r).exp(),
            AssociationPolicy::Strongest => base,
        }
    }

    pub fn lower_limit(&self, r: f64) -> f64 {
        match self.policy {
            AssociationPolicy::Closest => r,
            AssociationPolicy::Strongest => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// BS density in BS/m².
    pub lambda: f64,
    /// Noise power; 0 for the interference-limited (SIR) case.
    pub sigma2: f64,
    pub association: AssociationPolicy,
    /// Linear SIR/SINR threshold.
    pub theta: f64,
}

impl NetworkConfig {
    pub fn new(
        lambda: f64,
        sigma2: f64,
        association: AssociationPolicy,
        theta: f64,
    ) -> Result<Self> {
        let cfg = NetworkConfig {
            lambda,
            sigma2,
            association,
            theta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Interference-limited configuration with the threshold given in dB.
    pub fn sir(lambda: f64, association: AssociationPolicy, theta_db: f64) -> Result<Self> {
        Self::new(lambda, 0.0, association, db_to_linear(theta_db))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold theta must be > 0, got {}",
                self.theta
            )));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise power sigma2 must be >= 0, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn kernels(&self) -> AssociationKernels {
        self.association.kernels(self.lambda)
    }
}

/// Piecewise power-law path loss: `ℓ(r) = r^{-α_n}` on `[R_n, R_{n+1})` with
/// `R_0 = 0` and `R_N = ∞`. No amplitude matching is applied at the
/// transitions, so `ℓ` jumps there whenever the exponents differ.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossModel {
    exponents: Vec<f64>,
    transitions: Vec<f64>,
}

impl PathLossModel {
    pub fn single(alpha: f64) -> Result<Self> {
        Self::multi(vec![alpha], vec![])
    }

    pub fn dual(near: f64, far: f64, transition: f64) -> Result<Self> {
        Self::multi(vec![near, far], vec![transition])
    }

    pub fn multi(exponents: Vec<f64>, transitions: Vec<f64>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::InvalidParameter(
                "path loss needs at least one exponent".into(),
            ));
        }
        if transitions.len() + 1 != exponents.len() {
            return Err(Error::InvalidParameter(format!(
                "{} exponents need {} transition distances, got {}",
                exponents.len(),
                exponents.len() - 1,
                transitions.len()
            )));
        }
        if let Some(a) = exponents.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "path loss exponents must be positive and finite, got {a}"
            )));
        }
        if transitions.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter(
                "transition distances must be positive and finite".into(),
            ));
        }
        if transitions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "transition distances must be strictly increasing".into(),
            ));
        }
        Ok(PathLossModel {
            exponents,
            transitions,
        })
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn segments(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_single_slope(&self) -> bool {
        self.exponents.len() == 1
    }

    /// Exponent governing the interference tail; must exceed 2 for a finite
    /// aggregate interference.
    pub fn far_field_exponent(&self) -> f64 {
        *self.exponents.last().expect("non-empty by construction")
    }

    /// Segment containing `r`; a transition distance belongs to the segment
    /// that starts there.
    pub fn segment_of(&self, r: f64) -> usize {
        self.transitions.partition_point(|&t| t <= r)
    }

    /// `[start, end)` of segment `n`, `end = ∞` for the last one.
    pub fn segment_bounds(&self, n: usize) -> (f64, f64) {
        let lo = if n == 0 { 0.0 } else { self.transitions[n - 1] };
        let hi = self.transitions.get(n).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    pub fn exponent_at(&self, r: f64) -> f64 {
        self.exponents[self.segment_of(r)]
    }

    /// Path gain at distance `r > 0`.
    pub fn gain(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "path loss is singular at r = {r}; distance must be > 0"
            )));
        }
        Ok(self.gain_unchecked(r))
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, r: f64) -> f64 {
        r.powf(-self.exponent_at(r))
    }

    pub fn max_transition(&self) -> Option<f64> {
        self.transitions.last().copied()
    }
}

pub fn pathloss(model: &PathLossModel, r: f64) -> Result<f64> {
    model.gain(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LosModel {
    /// Every BS is NLOS.
    None,
    /// Distance-independent LOS probability.
    Constant(f64),
    /// ITU-R UMi: `min(d1/r, 1)(1 − e^{−r/d2}) + e^{−r/d2}`.
    Umi { d1: f64, d2: f64 },
    /// All BSs within `D` are LOS, all beyond are NLOS.
    Step(f64),
}

impl LosModel {
    pub const UMI_D1: f64 = 18.0;
    pub const UMI_D2: f64 = 36.0;

    pub fn umi() -> Self {
        LosModel::Umi {
            d1: Self::UMI_D1,
            d2: Self::UMI_D2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LosModel::None => Ok(()),
            LosModel::Constant(p) if (0.0..=1.0).contains(&p) => Ok(()),
            LosModel::Constant(p) => Err(Error::InvalidParameter(format!(
                "constant LOS probability must lie in [0, 1], got {p}"
            ))),
            LosModel::Umi { d1, d2 } if d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite() => {
                Ok(())
            }
            LosModel::Umi { .. } => Err(Error::InvalidParameter(
                "UMi distances d1, d2 must be positive".into(),
            )),
            LosModel::Step(d) if d > 0.0 && d.is_finite() => Ok(()),
            LosModel::Step(d) => Err(Error::InvalidParameter(format!(
                "step LOS distance must be > 0, got {d}"
            ))),
        }
    }

    /// LOS probability at distance `r ≥ 0`.
    pub fn probability(&self, r: f64) -> f64 {
        match *self {
            LosModel::None => 0.0,
            LosModel::Constant(p) => p,
            LosModel::Umi { d1, d2 } => {
                if r <= d1 {
                    1.0
                } else {
                    let e = (-r / d2).exp();
                    (d1 / r) * (1.0 - e) + e
                }
            }
            LosModel::Step(d) => {
                if r <= d {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, LosModel::None) || matches!(self, LosModel::Constant(p) if *p == 0.0)
    }

    /// Distances where `p_LOS` is not smooth; quadrature splits there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            LosModel::Umi { d1, .. } => vec![d1],
            LosModel::Step(d) => vec![d],
            _ => vec![],
        }
    }
}

pub fn plos(model: &LosModel, r: f64) -> f64 {
    model.probability(r)
}

/// Nakagami-m shape from a Ricean K-factor: `round((K+1)²/(2K+1))`, ties
/// rounded up, never below 1.
pub fn m_from_k(k_linear: f64) -> Result<u32> {
    if !(k_linear.is_finite() && k_linear >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Ricean K-factor must be >= 0, got {k_linear}"
        )));
    }
    let m = (k_linear + 1.0).powi(2) / (2.0 * k_linear + 1.0);
    Ok(((m + 0.5).floor() as u32).max(1))
}

/// Complementary cdf of a unit-mean Gamma(m, 1/m) power gain:
/// `e^{−mz} Σ_{k<m} (mz)^k / k!`.
pub fn gamma_ccdf(m: u32, z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    let x = m as f64 * z;
    if m == 1 {
        return (-x).exp();
    }
    // terms in log space so large mz neither overflows the power nor
    // underflows the exponential prematurely
    let ln_x = x.ln();
    let mut ln_term = -x;
    let mut sum = ln_term.exp();
    for k in 1..m {
        ln_term += ln_x - (k as f64).ln();
        sum += ln_term.exp();
    }
    sum.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    /// Nakagami shape of LOS links (integer, ≥ 1).
    pub m: u32,
    /// Ricean K (linear) the shape was derived from, when known.
    pub k_factor: Option<f64>,
}

impl FadingModel {
    pub fn rayleigh() -> Self {
        FadingModel {
            m: 1,
            k_factor: None,
        }
    }

    pub fn nakagami(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("Nakagami shape m must be >= 1".into()));
        }
        Ok(FadingModel { m, k_factor: None })
    }

    pub fn from_k_linear(k: f64) -> Result<Self> {
        Ok(FadingModel {
            m: m_from_k(k)?,
            k_factor: Some(k),
        })
    }

    pub fn from_k_db(k_db: f64) -> Result<Self> {
        Self::from_k_linear(db_to_linear(k_db))
    }

    /// P(h > z) for a LOS link.
    pub fn los_ccdf(&self, z: f64) -> f64 {
        gamma_ccdf(self.m, z)
    }

    /// P(h > z) for an NLOS (Rayleigh) link.
    pub fn nlos_ccdf(&self, z: f64) -> f64 {
        gamma_ccdf(1, z)
    }
}
