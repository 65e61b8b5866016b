use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate training: |K + lambda| = {magnitude:e} at spectrum cell {index}")]
    DegenerateTraining { index: usize, magnitude: f64 },

    #[error("singular system: {0}")]
    Singular(&'static str),

    #[error("box {0} lies entirely outside the frame")]
    OutOfFrame(String),

    #[error("wrong colorspace: expected {expected} channel(s), got {actual}")]
    WrongColorspace { expected: usize, actual: usize },

    #[error("no secondary peak: mask covers the whole response layer")]
    NoSecondaryPeak,

    #[error("tracker not initialized: {0}")]
    Uninitialized(&'static str),

    #[error("frame size {actual:?} does not match the initial frame {expected:?}")]
    FrameSizeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("frame count ({frames}) does not match ground-truth count ({boxes})")]
    CountMismatch { frames: usize, boxes: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("unknown attribute tag {0:?}")]
    UnknownAttribute(String),

    #[error("unknown variant {0:?}")]
    UnknownVariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn mismatch(expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> Self {
        Error::DimensionMismatch {
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }
}
