use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error("network error: {0}")]
    Network(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    /// True for failures caused by the environment (files, network) rather
    /// than by the inputs themselves.
    pub fn is_environmental(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Network(_))
    }
}

/// Validation failures while reading historical pool data.
///
/// Row numbers are 1-based line numbers in the source file (the header is
/// line 1).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("schema mismatch: expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("row {row}: price must be positive, got {price}")]
    NonPositivePrice { row: usize, price: f64 },

    #[error("duplicate timestamp {timestamp} (rows {first_row} and {row})")]
    DuplicateTimestamp {
        timestamp: i64,
        first_row: usize,
        row: usize,
    },

    #[error("row {row}: {counter} decreased relative to the previous row")]
    NonMonotoneCounter { row: usize, counter: &'static str },

    #[error("dataset is empty")]
    Empty,
}
