use thiserror::Error;

/// Errors raised by the transform, estimation and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlmError {
    #[error("signal length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("coarsest level j0 = {j0} must be below the finest level J = {levels}")]
    InvalidLevel { j0: u32, levels: u32 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown wavelet filter `{0}`")]
    UnknownFilter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient coefficients: {rows} rows for {cols} columns")]
    Insufficient { rows: usize, cols: usize },

    #[error("matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for PlmError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for PlmError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for PlmError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PlmError>;
