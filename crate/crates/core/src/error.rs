use thiserror::Error;

pub type Result<T> = std::result::Result<T, PielmError>;

#[derive(Debug, Error)]
pub enum PielmError {
    #[error("invalid weight range: low {low} must be below high {high}")]
    InvalidRange { low: f64, high: f64 },

    #[error("network width must be at least 1")]
    ZeroWidth,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative order {0} is not supported (maximum is 2)")]
    UnsupportedOrder(usize),

    #[error("network has no output weights; solve for them first")]
    Untrained,

    #[error("invalid finite-difference step h1={h1}, h2={h2}")]
    InvalidStep { h1: f64, h2: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {index} lies outside the closed domain")]
    OutsideDomain { index: usize },

    #[error("invalid problem parameter: {0}")]
    InvalidParameter(String),

    #[error("negative time {0} in Monte Carlo boundary point")]
    NegativeTime(f64),

    #[error("Monte Carlo model does not match the requested estimator")]
    ModelMismatch,

    #[error("non-finite value in {block} row {row}")]
    NonFinite { block: &'static str, row: usize },

    #[error("problem has no reference solution")]
    MissingReference,

    #[error("singular value decomposition failed to converge")]
    SvdFailed,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
