use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the attack pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input (bad node id, shape mismatch, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// An operation was called with arguments that violate its contract,
    /// e.g. adding an edge that already exists.
    #[error("contract violation: {0}")]
    Contract(String),

    /// No candidate edits are available for the requested target.
    #[error("no actions available for target {0}")]
    NoActions(usize),

    #[error("sampling error: {0}")]
    Sampling(String),

    /// Non-finite loss or gradient during training.
    #[error("training diverged: {0}")]
    Training(String),

    /// An exhaustive search would exceed its configured enumeration cap.
    #[error("instance too large: {0}")]
    Size(String),

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
