use thiserror::Error;

/// Errors produced by the channel models, analysis and simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{func}: argument outside domain ({detail})")]
    Domain { func: &'static str, detail: String },

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("degenerate correlation submatrix (zero fourth-order trace)")]
    DegenerateSubmatrix,

    #[error("empty sample set")]
    EmptySamples,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
