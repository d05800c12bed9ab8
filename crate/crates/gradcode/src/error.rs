//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (bad index, bad
    /// scheme/decoder pairing, size mismatch, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric parameter lies outside the formula's domain
    /// (e.g. epsilon outside (0, 0.25)).
    #[error("domain error: {0}")]
    Domain(String),

    /// A metric is undefined for the given input (e.g. AUC with a
    /// single-class label vector).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Malformed matrix file or config file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
