use std::path::PathBuf;

/// Errors produced by the model, the dynamics and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} index {index} out of range (limit {limit})")]
    OutOfRange { what: &'static str, index: usize, limit: usize },

    #[error("{what}: search size {size} exceeds cap {cap}")]
    Capacity { what: &'static str, size: u128, cap: u128 },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("move {step} rejected: {reason}")]
    MoveRejected { step: usize, reason: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    /// True for errors caused by bad user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidArgument(_) | Error::Capacity { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
