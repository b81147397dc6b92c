//! Laplace exponent of the aggregate interference and its derivatives.
//!
//! For interferers beyond `ν` the PGFL gives `L(s) = exp(η(s))` with
//!
//! `η(s) = −2πλ ∫_ν^∞ [(1 − p(t))·x/(1+x) + p(t)·(1 − (1 + x/m)^{−m})] t dt`,
//! `x = s·ℓ(t)`.
//!
//! Derivatives are returned as Taylor coefficients along `−s`,
//! `g_j = η^{(j)}(s)(−s)^j / j!`, whose integrands are closed form:
//! `x^j/(1+x)^{j+1}` for Rayleigh links and
//! `C(m+j−1, j)(x/m)^j(1 + x/m)^{−(m+j)}` for Nakagami-m links.

use std::f64::consts::PI;

use super::Scenario;
use crate::error::Result;
use crate::quadrature::{integrate_finite_vec, integrate_semi_infinite_vec, QuadSpec};

/// Fading law of the interfering BSs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Interferers {
    /// Rayleigh fading for every BS.
    Nlos,
    /// LOS with probability `p_LOS(t)`, Nakagami-m when LOS.
    Mixed,
}

pub(crate) struct ExponentEngine<'a> {
    pub scn: &'a Scenario,
    pub quad: QuadSpec,
    pub include_noise: bool,
}

/// `1/(1+x)` and `x/(1+x)`, safe for `x = ∞`.
#[inline]
fn split(x: f64) -> (f64, f64) {
    (1.0 / (1.0 + x), 1.0 / (1.0 + x.recip()))
}

impl<'a> ExponentEngine<'a> {
    fn breakpoints(&self, lower: f64, kind: Interferers) -> Vec<f64> {
        let mut bps: Vec<f64> = self.scn.pl.transitions().to_vec();
        if kind == Interferers::Mixed {
            bps.extend(self.scn.los.breakpoints());
        }
        bps.retain(|&b| b > lower);
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        bps
    }

    /// Integrates a `dim`-vector over `[lower, ∞)`, split at every
    /// path-loss and LOS breakpoint. The callback receives `(t, α(t), out)`.
    fn integrate<F>(&self, lower: f64, s_ref: f64, dim: usize, kind: Interferers, mut f: F) -> Result<(Vec<f64>, f64)>
    where
        F: FnMut(f64, f64, &mut [f64]),
    {
        let pl = &self.scn.pl;
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        let mut a = lower;
        for b in self.breakpoints(lower, kind) {
            let alpha = pl.exponent_at(0.5 * (a + b));
            let r = integrate_finite_vec(|t, out: &mut [f64]| f(t, alpha, out), a, b, dim, &self.quad)?;
            for (acc, v) in total.iter_mut().zip(&r.values) {
                *acc += v;
            }
            err += r.errors[0];
            a = b;
        }
        let alpha = pl.far_field_exponent();
        let scale = a.max(s_ref.powf(1.0 / alpha)).max(1e-12);
        let r = integrate_semi_infinite_vec(
            |t, out: &mut [f64]| f(t, alpha, out),
            a,
            scale,
            dim,
            &self.quad,
            Some(alpha - 1.0),
        )?;
        for (acc, v) in total.iter_mut().zip(&r.values) {
            *acc += v;
        }
        err += r.errors[0];
        Ok((total, err))
    }

    fn los_weight(&self, kind: Interferers, t: f64) -> f64 {
        match kind {
            Interferers::Nlos => 0.0,
            Interferers::Mixed => self.scn.los.probability(t),
        }
    }

    /// Taylor coefficients `g_0..=g_order` of `η` at `s` for interferers
    /// beyond `lower`.
    pub fn coefficients(&self, lower: f64, s: f64, order: usize, kind: Interferers) -> Result<Vec<f64>> {
        let dim = order + 1;
        if s == 0.0 {
            return Ok(vec![0.0; dim]);
        }
        let m = self.scn.fading.m as f64;
        let (raw, _) = self.integrate(lower, s, dim, kind, |t, alpha, out| {
            out.fill(0.0);
            let x = s * t.powf(-alpha);
            let p = self.los_weight(kind, t);
            if p < 1.0 {
                let (base, q) = split(x);
                let w = (1.0 - p) * t;
                out[0] += w * q;
                let mut term = base;
                for v in out.iter_mut().skip(1) {
                    term *= q;
                    *v += w * term;
                }
            }
            if p > 0.0 {
                let y = x / m;
                let (_, qb) = split(y);
                let log1p = y.ln_1p();
                let w = p * t;
                out[0] += w * -(-m * log1p).exp_m1();
                let mut term = (-m * log1p).exp();
                let mut binom = 1.0;
                for (j, v) in out.iter_mut().enumerate().skip(1) {
                    binom *= (m + j as f64 - 1.0) / j as f64;
                    term *= qb;
                    *v += w * binom * term;
                }
            }
        })?;
        let c = 2.0 * PI * self.scn.net.lambda;
        let mut g: Vec<f64> = raw.iter().map(|v| c * v).collect();
        g[0] = -g[0];
        if self.include_noise {
            let sigma2 = self.scn.net.sigma2;
            g[0] -= s * sigma2;
            if order >= 1 {
                g[1] += s * sigma2;
            }
        }
        Ok(g)
    }

    /// `η(s_i)` for several arguments with a shared subdivision.
    pub fn exponents(&self, lower: f64, ss: &[f64], kind: Interferers) -> Result<Vec<f64>> {
        if ss.iter().all(|&s| s == 0.0) {
            return Ok(vec![0.0; ss.len()]);
        }
        let m = self.scn.fading.m as f64;
        let s_ref = ss.iter().copied().fold(0.0, f64::max);
        let (raw, _) = self.integrate(lower, s_ref, ss.len(), kind, |t, alpha, out| {
            let pl = t.powf(-alpha);
            let p = self.los_weight(kind, t);
            for (v, &s) in out.iter_mut().zip(ss) {
                let x = s * pl;
                let mut acc = 0.0;
                if p < 1.0 {
                    acc += (1.0 - p) * split(x).1;
                }
                if p > 0.0 {
                    acc += p * -(-m * (x / m).ln_1p()).exp_m1();
                }
                *v = acc * t;
            }
        })?;
        let c = 2.0 * PI * self.scn.net.lambda;
        let noise = if self.include_noise { self.scn.net.sigma2 } else { 0.0 };
        Ok(raw
            .iter()
            .zip(ss)
            .map(|(v, &s)| -c * v - s * noise)
            .collect())
    }

    pub fn exponent(&self, lower: f64, s: f64, kind: Interferers) -> Result<f64> {
        Ok(self.exponents(lower, &[s], kind)?[0])
    }
}
