use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("manifest parse error: {0}")]
    ManifestParse(#[from] serde_json::Error),

    #[error("video {video_id}: {message}")]
    ShotCoverage { video_id: String, message: String },

    #[error("video {video_id}: channel {channel} references missing file {path}")]
    DanglingReference {
        video_id: String,
        channel: String,
        path: PathBuf,
    },

    #[error("invalid descriptor file {path}: {message}")]
    DescriptorFormat { path: PathBuf, message: String },

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("average precision undefined: no positive labels")]
    NoPositives,

    #[error("unknown action class {0}")]
    UnknownClass(String),

    #[error("video {video_id}, shot {shot}: label is unresolved")]
    UnresolvedLabel { video_id: String, shot: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
