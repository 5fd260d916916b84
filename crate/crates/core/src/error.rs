use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// The CLI maps `Io` to exit code 1, configuration errors (`Invalid`,
/// `Schema`, `Dimension`, `Unsupported`) to 2 and numeric failures to 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmciError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("budget too small: {0}")]
    Budget(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl QmciError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QmciError::Invalid(msg.into())
    }
}

impl From<std::io::Error> for QmciError {
    fn from(e: std::io::Error) -> Self {
        QmciError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QmciError>;
