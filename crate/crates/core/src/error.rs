use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size {value} outside the supported range {min}..={max} for {what}")]
    SizeLimit {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("order {requested} exceeds the available order cap {cap}")]
    OrderCap { requested: usize, cap: usize },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("element does not lie in the {0} span (residual {1:.3e})")]
    NotInSpan(&'static str, f64),

    #[error("series is not valued in the subalgebra: {0}")]
    NotValuedIn(String),

    #[error("ladder level {level} exceeds truncation {cap}")]
    LevelCap { level: usize, cap: usize },

    #[error("word expansion exceeded the limit of {limit} words")]
    WordLimit { limit: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
