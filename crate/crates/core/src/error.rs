use std::path::PathBuf;

/// Errors raised by the library.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Nearest-neighbour matching needs a second-nearest candidate.
    #[error("insufficient keypoints: need at least {needed}, got {got}")]
    InsufficientKeypoints { needed: usize, got: usize },
    /// A text file did not follow its declared format.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
