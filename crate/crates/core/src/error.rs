use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} of the transition matrix is not a probability vector (sum = {sum})")]
    NonStochasticRow { row: usize, sum: f64 },

    #[error("initial law is not a probability vector (sum = {sum})")]
    BadProbabilityVector { sum: f64 },

    #[error("jump rate of state {state} must be strictly positive, got {value}")]
    NonPositiveRate { state: usize, value: f64 },

    #[error("beta law of state {state} has invalid shape (alpha = {alpha}, beta = {beta})")]
    BadShape { state: usize, alpha: f64, beta: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("mean drift matrix is numerically singular (reciprocal condition {rcond:e})")]
    SingularB { rcond: f64 },

    #[error("initial record must lie in [0, 1), got {0}")]
    BadInitial(f64),

    #[error("invalid time grid: {0}")]
    BadGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("record level {0} is too close to 1 to normalize the next jump")]
    DegenerateRecord(f64),

    #[error("price series is empty")]
    EmptySeries,

    #[error("invalid price series: {0}")]
    BadSeries(String),

    #[error("event list is empty")]
    EmptyEvents,

    #[error("sample is empty")]
    EmptySample,

    #[error("sample contains a non-positive value {0}")]
    NonPositiveSample(f64),

    #[error("value {0} lies outside the open unit interval")]
    OutOfRange(f64),

    #[error("sample has zero variance")]
    DegenerateSample,

    #[error("too few events: {got} observations for {k} states (need at least {need})")]
    TooFewEvents { got: usize, k: usize, need: usize },

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for malformed input (unreadable files, bad CSV/JSON); false for
    /// well-formed input whose values fall outside an operation's domain.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io { .. } | Error::Json { .. })
    }
}
