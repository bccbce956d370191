use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid length: {0}")]
    InvalidLength(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("regression error: {0}")]
    Regression(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("format error at {path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, msg: msg.into() }
    }

    /// True for errors that come from malformed inputs rather than numerics.
    pub fn is_io_or_format(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }
}
