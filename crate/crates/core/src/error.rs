use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("volatility fell below the positivity floor too often (first offending interval {interval}, {clamps} clamps)")]
    VolatilityFloor { interval: u64, clamps: u64 },

    #[error("volatility left the admissible bound {bound} in interval {interval}")]
    BoundExceeded { interval: u64, bound: f64 },

    #[error("time {t} outside the observation window (0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("derivative of |x|^{power} at x = 0 does not exist (coordinate {coord})")]
    DerivativeDomain { coord: usize, power: f64 },

    #[error("kernel parse error: {0}")]
    KernelParse(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("nested evaluation refused for d = {d}, {count} increments; use a separable kernel")]
    NestedGuard { d: usize, count: usize },

    #[error("enumeration budget exceeded: {needed} terms (limit {limit})")]
    Budget { needed: f64, limit: f64 },

    #[error("covariance factorisation failed; smallest eigenvalue {min_eigenvalue:e}")]
    Cholesky { min_eigenvalue: f64 },

    #[error("jump {index} does not lie on the observed grid")]
    JumpOffGrid { index: usize },

    #[error("kernel not admissible for {regime}: {failures}")]
    NotAdmissible { regime: String, failures: String },

    #[error("malformed binary path dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
