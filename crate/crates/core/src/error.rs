use thiserror::Error;

/// Errors produced by the library.
///
/// Display strings are stable: the CLI and the C API surface them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty score list")]
    EmptyScores,

    #[error("non-finite score {value} at position {position}")]
    NonFiniteScore { position: usize, value: f64 },

    #[error("insufficient context: scores need index > {memory}, got {from_index}")]
    InsufficientContext { memory: usize, from_index: usize },

    #[error("no calibration scores: need n > {memory}, got n = {n}")]
    NoCalibrationScores { n: usize, memory: usize },

    #[error("calibration block too short: need at least {needed} points, got {n1}")]
    CalibrationBlockTooShort { n1: usize, needed: usize },

    #[error("training block too short: need at least {needed} points, got {got}")]
    TrainingBlockTooShort { needed: usize, got: usize },

    #[error("interval form unavailable: score function has no point prediction")]
    IntervalUnavailable,

    #[error("state space too large: {cells} cells exceeds cap of {cap}")]
    StateSpaceTooLarge { cells: u128, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incomplete table: {0}")]
    IncompleteTable(String),

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error("non-numeric cell at row {row}, column {column}: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
