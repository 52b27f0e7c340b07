use std::path::PathBuf;

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("vectors have different dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("{list} is empty after removing out-of-vocabulary words")]
    EmptyList { list: String },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            line,
            message: message.into(),
        }
    }
}
