//! Coverage probability of ultra-dense cellular networks with mixed
//! line-of-sight (LOS) and non-line-of-sight (NLOS) propagation.
//!
//! - [`model`]: network, path loss, LOS probability and fading descriptions.
//! - [`quadrature`]: adaptive Gauss–Kronrod integration on finite and
//!   semi-infinite ranges.
//! - [`analytic`]: Laplace-functional coverage expressions, derivative
//!   recursion, step-model simplification and its derivative-free upper bound.
//! - [`montecarlo`]: PPP simulator used as ground truth.
//! - [`sweep`]: JSON-configured parameter sweeps emitting CSV/JSON lines.

pub mod analytic;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod sweep;

pub use analytic::{Analytic, CoverageFlags, CoverageResult, LaplaceEvaluation, Method, Scenario};
pub use error::{Error, Result};
pub use model::{AssociationPolicy, FadingModel, LosModel, NetworkConfig, PathLossModel};
pub use montecarlo::{McEstimate, SimSpec, WindowRadius};
pub use quadrature::QuadSpec;
