use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-positive price {price} at row {row}")]
    NonPositivePrice { row: usize, price: f64 },

    #[error("duplicate timestamp {timestamp}")]
    DuplicateTimestamp { timestamp: String },

    #[error("session labels decrease at row {row}")]
    NonMonotonicSession { row: usize },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("window size {size} is below the minimum of {min}")]
    WindowTooSmall { size: usize, min: usize },

    #[error("window {index} has zero variance")]
    DegenerateWindow { index: usize },

    #[error("kurtosis curve never crosses 3 (closest approach {closest_kurtosis:.4} at dt = {closest_dt})")]
    NoCrossing {
        closest_dt: usize,
        closest_kurtosis: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    #[error(
        "quadrature failed to reach tolerance (worst point {point}, estimated error {error:e})"
    )]
    QuadratureFailure { point: f64, error: f64 },

    #[error("too few usable points for a decay fit: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("every correlation value is below the noise floor {floor:e}")]
    AllBelowFloor { floor: f64 },

    #[error("period {period} is too long for {max_lag} lags")]
    PeriodTooLong { period: usize, max_lag: usize },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
