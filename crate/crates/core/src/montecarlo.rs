//! Monte Carlo estimation of coverage over Poisson realizations of the
//! base-station layout.
//!
//! Each realization is the PPP restricted to a disc of radius `R` around the
//! user, generated in order of increasing distance. Only distances matter, so
//! points are stored as `(r, los, h)`. Realization `i` uses ChaCha8 stream `i` under the run
//! seed, which makes every estimate independent of how realizations are
//! scheduled across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use rayon::prelude::*;

use crate::analytic::Scenario;
use crate::error::{Error, Result};
use crate::model::{AssociationPolicy, PathLossModel};

/// Expected number of BSs inside an automatically sized window.
pub const AUTO_WINDOW_POINTS: f64 = 1000.0;
/// The automatic window also covers this multiple of the last path-loss transition.
pub const AUTO_WINDOW_TRANSITION_FACTOR: f64 = 2.0;

const CHUNK: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowRadius {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub scn: Scenario,
    pub n_realizations: u64,
    pub seed: u64,
    pub window_radius: WindowRadius,
}

impl SimSpec {
    pub const DEFAULT_REALIZATIONS: u64 = 100_000;

    pub fn new(scn: Scenario, n_realizations: u64, seed: u64) -> Result<Self> {
        let spec = SimSpec {
            scn,
            n_realizations,
            seed,
            window_radius: WindowRadius::Auto,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_window(mut self, window_radius: WindowRadius) -> Self {
        self.window_radius = window_radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scn.validate()?;
        if self.n_realizations == 0 {
            return Err(Error::InvalidParameter("n_realizations must be >= 1".into()));
        }
        if let WindowRadius::Fixed(r) = self.window_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter(format!("window radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }

    /// Simulation window radius in metres.
    ///
    /// Auto: `max(√(1000/(πλ)), 2·R_last)` with `R_last` the last path-loss
    /// transition (0 for single slope).
    pub fn radius(&self) -> f64 {
        match self.window_radius {
            WindowRadius::Fixed(r) => r,
            WindowRadius::Auto => {
                let lambda = self.scn.net.lambda;
                let by_count = (AUTO_WINDOW_POINTS / (std::f64::consts::PI * lambda)).sqrt();
                let last = self.scn.pl.max_transition().unwrap_or(0.0);
                by_count.max(AUTO_WINDOW_TRANSITION_FACTOR * last)
            }
        }
    }

    pub fn expected_points(&self) -> f64 {
        let r = self.radius();
        self.scn.net.lambda * std::f64::consts::PI * r * r
    }
}

/// One base station as seen from the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPoint {
    pub r: f64,
    pub los: bool,
    /// Unit-mean power fading gain.
    pub h: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Realization {
    pub points: Vec<BsPoint>,
}

impl Realization {
    /// Received power from every point.
    pub fn powers(&self, pl: &PathLossModel) -> Vec<f64> {
        self.points.iter().map(|p| p.h * pl.gain_unchecked(p.r)).collect()
    }

    /// Index of the nearest BS; the lowest index wins ties.
    pub fn closest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            if best.is_none_or(|(_, r)| p.r < r) {
                best = Some((i, p.r));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// SINR of point `serving`: `h_x ℓ(r_x) / (Σ_{y≠x} h_y ℓ(r_y) + σ²)`.
pub fn sir_of(realization: &Realization, pl: &PathLossModel, serving: usize, sigma2: f64) -> Result<f64> {
    if realization.points.is_empty() {
        return Err(Error::EmptyRealization);
    }
    let Some(x) = realization.points.get(serving) else {
        return Err(Error::InvalidParameter(format!(
            "serving index {serving} out of range for {} points",
            realization.points.len()
        )));
    };
    let signal = x.h * pl.gain(x.r)?;
    let mut interference = 0.0;
    for (i, y) in realization.points.iter().enumerate() {
        if i != serving {
            interference += y.h * pl.gain(y.r)?;
        }
    }
    Ok(sinr(signal, interference + sigma2))
}

#[inline]
fn sinr(signal: f64, denom: f64) -> f64 {
    if denom == 0.0 {
        f64::INFINITY
    } else {
        signal / denom
    }
}

/// Generates points outward in distance: `πλ r_k²` is a unit-rate Poisson
/// process, so `πλ r_k² − πλ r_{k−1}²` are i.i.d. Exp(1). Each point then
/// draws its LOS mark and gain. A realization in a larger window therefore
/// extends the one in a smaller window with the same seed and index.
struct Sampler {
    los_gain: Gamma<f64>,
    /// `πλ` and `πλR²`.
    scale: f64,
    limit: f64,
}

impl Sampler {
    fn new(spec: &SimSpec) -> Self {
        let r = spec.radius();
        let scale = spec.scn.net.lambda * std::f64::consts::PI;
        let m = spec.scn.fading.m as f64;
        Sampler {
            los_gain: Gamma::new(m, 1.0 / m).expect("m >= 1"),
            scale,
            limit: scale * r * r,
        }
    }

    fn fill(&self, spec: &SimSpec, index: u64, out: &mut Vec<BsPoint>) {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index);
        out.clear();
        let los_model = &spec.scn.los;
        let mut area = 0.0;
        loop {
            let step: f64 = Exp1.sample(&mut rng);
            area += step;
            if area > self.limit {
                break;
            }
            let r = (area / self.scale).sqrt();
            let los = rng.gen::<f64>() < los_model.probability(r);
            let h = if los {
                self.los_gain.sample(&mut rng)
            } else {
                Exp1.sample(&mut rng)
            };
            out.push(BsPoint { r, los, h });
        }
    }
}

/// Deterministic realization number `index` of `spec`.
pub fn realize(spec: &SimSpec, index: u64) -> Realization {
    let mut points = Vec::new();
    Sampler::new(spec).fill(spec, index, &mut points);
    Realization { points }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub pcov_hat: f64,
    /// Binomial standard error `√(p̂(1−p̂)/n)`.
    pub stderr: f64,
    pub n: u64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, n: u64) -> Self {
        let p = successes as f64 / n as f64;
        McEstimate {
            pcov_hat: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }
}

/// Mean number of BSs whose SINR exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    covered: u64,
    count: u64,
    count_sq: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally {
            covered: self.covered + o.covered,
            count: self.count + o.count,
            count_sq: self.count_sq + o.count_sq,
        }
    }
}

fn run(spec: &SimSpec) -> Result<Tally> {
    spec.validate()?;
    let sampler = Sampler::new(spec);
    let theta = spec.scn.net.theta;
    let sigma2 = spec.scn.net.sigma2;
    let pl = &spec.scn.pl;
    let association = spec.scn.net.association;
    let n = spec.n_realizations;
    let chunks = n.div_ceil(CHUNK);

    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut points = Vec::new();
            let mut powers = Vec::new();
            let mut t = Tally::default();
            for index in c * CHUNK..((c + 1) * CHUNK).min(n) {
                sampler.fill(spec, index, &mut points);
                if points.is_empty() {
                    continue;
                }
                powers.clear();
                powers.extend(points.iter().map(|p| p.h * pl.gain_unchecked(p.r)));
                let total: f64 = powers.iter().sum();

                let serving = match association {
                    AssociationPolicy::Closest => {
                        let mut best = 0;
                        for (i, p) in points.iter().enumerate() {
                            if p.r < points[best].r {
                                best = i;
                            }
                        }
                        best
                    }
                    AssociationPolicy::Strongest => {
                        let mut best = 0;
                        for (i, &p) in powers.iter().enumerate() {
                            if p > powers[best] {
                                best = i;
                            }
                        }
                        best
                    }
                };
                let interference: f64 = powers
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != serving)
                    .map(|(_, p)| p)
                    .sum();
                if sinr(powers[serving], interference + sigma2) > theta {
                    t.covered += 1;
                }
                let k = powers
                    .iter()
                    .filter(|&&p| sinr(p, (total - p).max(0.0) + sigma2) > theta)
                    .count() as u64;
                t.count += k;
                t.count_sq += k * k;
            }
            t
        })
        .reduce(Tally::default, |a, b| a + b);
    Ok(tally)
}

/// Coverage estimate. Closest: the nearest BS must exceed `θ`; Strongest:
/// any BS must. Empty windows count as outages.
pub fn estimate_coverage(spec: &SimSpec) -> Result<McEstimate> {
    let t = run(spec)?;
    Ok(McEstimate::from_counts(t.covered, spec.n_realizations))
}

/// Expected number of BSs with SINR above `θ`. For `θ ≥ 1` at most one BS
/// can qualify and this equals the strongest-association coverage.
pub fn estimate_covering_count(spec: &SimSpec) -> Result<CountEstimate> {
    let t = run(spec)?;
    let n = spec.n_realizations as f64;
    let mean = t.count as f64 / n;
    let var = (t.count_sq as f64 / n - mean * mean).max(0.0);
    Ok(CountEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n: spec.n_realizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FadingModel, LosModel, NetworkConfig};

    fn scenario(lambda: f64, los: LosModel, m: u32, association: AssociationPolicy) -> Scenario {
        Scenario::new(
            NetworkConfig::new(lambda, 0.0, association, 1.0).unwrap(),
            PathLossModel::single(4.0).unwrap(),
            los,
            FadingModel::nakagami(m).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn auto_window_has_enough_points() {
        for &lambda in &[1e-4, 1e-3, 1e-1, 10.0] {
            for los in [LosModel::None, LosModel::umi(), LosModel::Step(18.0)] {
                let spec = SimSpec::new(scenario(lambda, los, 17, AssociationPolicy::Closest), 10, 1).unwrap();
                assert!(spec.expected_points() >= 100.0);
            }
        }
        let spec = SimSpec::new(scenario(1e-4, LosModel::None, 1, AssociationPolicy::Closest), 10, 1).unwrap();
        let mean: f64 = (0..200).map(|i| realize(&spec, i).points.len() as f64).sum::<f64>() / 200.0;
        assert!(mean >= 100.0);
    }

    #[test]
    fn larger_window_extends_smaller_one() {
        let scn = scenario(1e-2, LosModel::umi(), 17, AssociationPolicy::Closest);
        let small = SimSpec::new(scn.clone(), 10, 3).unwrap().with_window(WindowRadius::Fixed(60.0));
        let large = SimSpec::new(scn, 10, 3).unwrap().with_window(WindowRadius::Fixed(120.0));
        for i in 0..10 {
            let a = realize(&small, i).points;
            let b = realize(&large, i).points;
            assert!(b.len() >= a.len());
            assert_eq!(a[..], b[..a.len()]);
            assert!(b[a.len()..].iter().all(|p| p.r > 60.0 && p.r <= 120.0));
            assert!(a.windows(2).all(|w| w[0].r <= w[1].r));
        }
    }

    #[test]
    fn no_los_model_means_no_los_points() {
        let spec = SimSpec::new(scenario(1e-2, LosModel::None, 17, AssociationPolicy::Closest), 10, 7).unwrap();
        for i in 0..20 {
            assert!(realize(&spec, i).points.iter().all(|p| !p.los));
        }
    }

    #[test]
    fn step_model_marks_near_points_los() {
        let spec = SimSpec::new(scenario(1e-2, LosModel::Step(18.0), 17, AssociationPolicy::Closest), 10, 7).unwrap();
        for i in 0..20 {
            for p in realize(&spec, i).points {
                assert_eq!(p.los, p.r <= 18.0);
                assert!(p.h > 0.0);
                assert!(p.r > 0.0 && p.r <= spec.radius());
            }
        }
    }

    #[test]
    fn realizations_are_reproducible() {
        let spec = SimSpec::new(scenario(1e-2, LosModel::umi(), 17, AssociationPolicy::Closest), 10, 99).unwrap();
        assert_eq!(realize(&spec, 5), realize(&spec, 5));
        assert_ne!(realize(&spec, 5), realize(&spec, 6));
    }

    #[test]
    fn sir_edge_cases() {
        let pl = PathLossModel::single(4.0).unwrap();
        let single = Realization {
            points: vec![BsPoint { r: 3.0, los: false, h: 0.5 }],
        };
        assert_eq!(sir_of(&single, &pl, 0, 0.0).unwrap(), f64::INFINITY);
        let pair = Realization {
            points: vec![
                BsPoint { r: 2.0, los: false, h: 1.0 },
                BsPoint { r: 2.0, los: true, h: 1.0 },
            ],
        };
        assert_eq!(sir_of(&pair, &pl, 0, 0.0).unwrap(), 1.0);
        // desk calculation: powers 1·1^-4 = 1, 2·2^-4 = 0.125, 0.5·4^-4 = 1/512
        let three = Realization {
            points: vec![
                BsPoint { r: 1.0, los: true, h: 1.0 },
                BsPoint { r: 2.0, los: false, h: 2.0 },
                BsPoint { r: 4.0, los: false, h: 0.5 },
            ],
        };
        let expected = 1.0 / (0.125 + 1.0 / 512.0);
        assert!((sir_of(&three, &pl, 0, 0.0).unwrap() - expected).abs() < 1e-12);
        let expected_noisy = 0.125 / (1.0 + 1.0 / 512.0 + 0.1);
        assert!((sir_of(&three, &pl, 1, 0.1).unwrap() - expected_noisy).abs() < 1e-12);
        assert_eq!(sir_of(&Realization::default(), &pl, 0, 0.0), Err(Error::EmptyRealization));
        assert!(sir_of(&three, &pl, 3, 0.0).is_err());
    }

    #[test]
    fn closest_tie_goes_to_lowest_index() {
        let r = Realization {
            points: vec![
                BsPoint { r: 5.0, los: false, h: 1.0 },
                BsPoint { r: 2.0, los: false, h: 1.0 },
                BsPoint { r: 2.0, los: false, h: 3.0 },
            ],
        };
        assert_eq!(r.closest(), Some(1));
        assert_eq!(Realization::default().closest(), None);
    }

    #[test]
    fn gamma_gains_have_unit_mean() {
        let spec = SimSpec::new(scenario(1.0, LosModel::None, 17, AssociationPolicy::Closest), 10, 3).unwrap();
        let sampler = Sampler::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| sampler.los_gain.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn estimator_limits() {
        let scn = scenario(1e-2, LosModel::None, 1, AssociationPolicy::Closest);
        let low = SimSpec::new(scn.with_theta(1e-9), 2000, 5).unwrap();
        assert!(estimate_coverage(&low).unwrap().pcov_hat > 0.99);
        let high = SimSpec::new(scn.with_theta(1e9), 2000, 5).unwrap();
        assert!(estimate_coverage(&high).unwrap().pcov_hat < 0.01);
    }

    #[test]
    fn estimate_is_bit_identical_across_thread_counts() {
        let spec = SimSpec::new(scenario(1e-2, LosModel::umi(), 17, AssociationPolicy::Strongest), 3000, 42).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| estimate_coverage(&spec)).unwrap();
        let b = four.install(|| estimate_coverage(&spec)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pcov_hat.to_bits(), b.pcov_hat.to_bits());
    }
}
