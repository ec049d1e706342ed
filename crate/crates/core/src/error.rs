use thiserror::Error;

/// Errors raised by constructors, rate computations, fitting and configuration.
#[derive(Debug, Error)]
pub enum FsdError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("spectrum family mismatch: {0}")]
    FamilyMismatch(String),

    #[error(
        "signal coefficient {value} at index {index} sits on a zero eigenvalue inside the estimation block; \
         the inverse-weighted head norm is infinite"
    )]
    InfiniteHeadNorm { index: usize, value: f64 },

    #[error("gradient descent needs an integer number of steps, got t = {0}")]
    NonIntegerSteps(f64),

    #[error("symmetric eigensolver did not converge on a {dim}x{dim} matrix ({report})")]
    EigenFailure { dim: usize, report: String },

    #[error("trial {trial_id} failed: {source}")]
    Trial {
        trial_id: u64,
        #[source]
        source: Box<FsdError>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = FsdError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> FsdError {
    FsdError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
