//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by trace ingestion, instance assembly, solving,
/// simulation, and training.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or unreadable input data.
    #[error("data error: {0}")]
    Data(String),

    /// A caller violated an operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An optimization subroutine failed.
    #[error("solver error: {0}")]
    Solver(String),

    /// Training diverged or produced non-finite values.
    #[error("training error: {0}")]
    Training(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
