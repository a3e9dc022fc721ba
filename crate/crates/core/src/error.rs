use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (entry ({row}, {col}) differs from its transpose)")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not orthogonal: |QᵀQ - I|_F = {defect:e}")]
    NotOrthogonal { defect: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e}")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coefficient at x = {point:?} is invalid: {reason}")]
    InvalidCoefficient { point: Vec<f64>, reason: String },

    #[error("distortion {distortion} too large for this alpha (threshold {threshold})")]
    DistortionTooLarge { distortion: f64, threshold: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("coupling map failed the measure-preservation audit (chi-square {statistic:.3} > critical {critical:.3})")]
    NotMeasurePreserving { statistic: f64, critical: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
