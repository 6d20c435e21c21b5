use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called on ids that do not satisfy its precondition
    /// (inactive endpoints, non-adjacent pair, out-of-range id).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("capacity exhausted: {used} of {capacity} node ids already allocated")]
    Capacity { used: usize, capacity: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("graph too large for exact computation: n = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
