use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is not a power of two")]
    DimensionNotPowerOfTwo(usize),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("democratic embedding did not converge: residual {residual:.3e} after {iters} iterations")]
    NoConvergence { residual: f64, iters: usize },

    #[error("instance too large for the exact oracle: {0}")]
    ScaleTooLarge(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("invalid bit budget {0}")]
    InvalidBudget(f64),

    #[error("quantizer index {index} outside [1, {levels}]")]
    IndexOutOfRange { index: u64, levels: u64 },

    #[error("budget too large: d*B = {0} exceeds the enumerable cap of 30 bits")]
    BudgetTooLarge(f64),

    #[error("design matrix is rank deficient (sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("delta grid is empty")]
    EmptyGrid,

    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),

    #[error("slack constant {k} must exceed {min}")]
    InvalidSlackConstant { k: f64, min: f64 },

    #[error("invalid scale: {0}")]
    InvalidScale(String),

    #[error("unknown learning code `{0}`")]
    UnknownCode(String),

    #[error("malformed payload: {0}")]
    Payload(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Infeasible | Error::RankDeficient { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
