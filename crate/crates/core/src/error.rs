use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("png decode error at byte {offset}: {message}")]
    Decode { offset: u64, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed float map: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("expected {expected} channel(s), found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("distribution fit failed: {0}")]
    Fit(String),

    #[error("invalid sample data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
