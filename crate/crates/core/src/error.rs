use std::path::PathBuf;

/// Errors raised across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(String),
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("confidence length {conf} does not match point count {points}")]
    ConfidenceLength { points: usize, conf: usize },
    #[error("track sets have {0} and {1} frames")]
    MismatchedFrameCount(usize, usize),
    #[error("track set is empty")]
    EmptyTracks,
    #[error("expected {expected} views, got {got}")]
    WrongViewCount { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("group of size {0} is too small, need at least 2")]
    GroupTooSmall(usize),
    #[error("requested {requested} tracks but only {available} available")]
    InsufficientTracks { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("at training step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for inputs that cannot be scored (as opposed to I/O failures).
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::EmptyCloud
                | Error::DegenerateCloud(_)
                | Error::EmptyTracks
                | Error::MismatchedFrameCount(..)
                | Error::InsufficientTracks { .. }
        )
    }
}
