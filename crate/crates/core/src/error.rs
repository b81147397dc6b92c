use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Adaptive quadrature ran out of subdivisions before meeting tolerance.
    #[error("quadrature did not converge on [{a}, {b}] after {subdivisions} subdivisions (estimate {value:e}, error {error:e})")]
    NonConvergence {
        a: f64,
        b: f64,
        subdivisions: usize,
        value: f64,
        error: f64,
    },

    /// Integrand on a semi-infinite range does not decay fast enough to be integrable.
    #[error("divergent tail from {from}: {reason}")]
    DivergentTail { from: f64, reason: String },

    #[error("derivative order {order} requested but fading shape m = {m} only supports orders below m")]
    OrderTooHigh { order: usize, m: u32 },

    #[error("realization contains no base stations")]
    EmptyRealization,

    #[error("operation requires {0}")]
    Unsupported(&'static str),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::DivergentTail { .. })
    }
}
