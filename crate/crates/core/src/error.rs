use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid interval [{a}, {b}]: {reason}")]
    InvalidInterval { a: f64, b: f64, reason: &'static str },

    #[error("invalid Rényi order {0}: order must be finite and greater than 1")]
    InvalidOrder(f64),

    #[error("invalid probability {value} for {name}: must lie in (0, 1)")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("degenerate interval mass: {0}")]
    DegenerateMass(String),

    #[error("rejection loop exceeded {max_attempts} attempts; the interval mass is too small")]
    AttemptsExceeded { max_attempts: u64 },

    #[error("RDP curve is empty")]
    EmptyCurve,

    #[error("RDP curves have mismatched alpha grids")]
    MismatchedGrids,

    #[error("quadrature did not converge after {evaluations} evaluations (error estimate {error_estimate:e})")]
    NoConvergence { evaluations: usize, error_estimate: f64 },

    #[error("target epsilon {target} unachievable: parameter {parameter} still gives epsilon {achieved}")]
    Unachievable { target: f64, parameter: f64, achieved: f64 },

    #[error("ledger error: {0}")]
    Ledger(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
