use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion is not unit norm (|q| = {norm})")]
    NonUnitQuaternion { norm: f64 },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("histogram bins do not match ({0} vs {1})")]
    BinMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("scan too short: {frames} frames, need at least {required}")]
    ScanTooShort { frames: usize, required: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("payload size mismatch: sidecar expects {expected} values, file holds {actual} bytes")]
    PayloadSize { expected: usize, actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
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
