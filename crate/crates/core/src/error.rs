use thiserror::Error;

/// Errors raised anywhere in the emulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PqsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("resource limit: {what} needs {requested}, limit is {limit}")]
    ResourceLimit {
        what: String,
        requested: usize,
        limit: usize,
    },

    #[error("evolution failed after {substeps} substeps (residual estimate {residual:.3e})")]
    EvolutionFailure { substeps: usize, residual: f64 },

    #[error("ambiguous configuration: {0}")]
    Ambiguity(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, PqsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(PqsError::InvalidArgument(msg.into()))
}

pub(crate) fn check_qubits(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(PqsError::DimensionMismatch { expected, found })
    }
}
