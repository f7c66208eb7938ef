use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("triplet ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    TripletOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix has no nonzero entries")]
    EmptyMatrix,

    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },

    #[error("dense pseudo-inverse refused: {rows}x{cols} = {entries} entries exceeds cap {cap}")]
    SizeCapExceeded {
        rows: usize,
        cols: usize,
        entries: usize,
        cap: usize,
    },

    #[error("singular value decomposition did not converge")]
    SvdFailed,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
