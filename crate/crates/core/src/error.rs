use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e} below floor {floor:e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64, floor: f64 },

    #[error("non-finite value at layer {layer}")]
    NonFinite { layer: usize },

    #[error("chaotic variance growth: q exceeded {limit:e} after {iterations} iterations")]
    Divergence { iterations: usize, limit: f64 },

    #[error("fixed-point iteration did not converge in {0} iterations")]
    NoConvergence(usize),

    #[error("no sign change of chi1 - 1 on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("factorization failed after jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
