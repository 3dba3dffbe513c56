//! Error type shared across the crate.
//!
//! The three variants map onto the CLI's exit codes: `Io`/`Parse` -> 1,
//! `Invalid` -> 2, `Numerical` -> 3.

/// Crate-wide error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Precondition or usage violation (bad dimensions, out-of-range ids, ...).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Numerical failure (Cholesky breakdown, solver divergence, non-finite
    /// statistic, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A file parsed but its contents are malformed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
