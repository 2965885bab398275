use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse instance: {0}")]
    Parse(#[from] serde_json::Error),

    /// A structural invariant of an instance or input does not hold.
    #[error("invalid {field}[{index}]: {reason}")]
    Invalid {
        field: &'static str,
        index: usize,
        reason: String,
    },

    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("flow {flow} has zero total rate")]
    ZeroRateFlow { flow: usize },

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An internal numerical guarantee failed. Indicates a solver bug.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, index: usize, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            index,
            reason: reason.into(),
        }
    }
}
