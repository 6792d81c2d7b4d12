use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset, cost, prediction or split file could not be ingested.
    #[error("data error: {0}")]
    Data(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// An action that is not legal in the current state reached the environment.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("replay buffer not ready: {0}")]
    NotReady(String),

    /// Non-finite loss, gradient or parameter update.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::ContractViolation(_) => 1,
            Error::Data(_) | Error::Checkpoint(_) | Error::Io { .. } | Error::NotReady(_) => 2,
            Error::Divergence(_) => 3,
        }
    }
}
