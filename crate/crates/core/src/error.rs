use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    #[error("array `{name}` not found in archive; available members: {available:?}")]
    NotFound { name: String, available: Vec<String> },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{}: {source}", path.display())]
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
}
