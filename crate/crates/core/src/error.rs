use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the search library and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("index {index} out of range 1..={max}")]
    Index { index: u64, max: u64 },

    #[error("numeric instability: {0}")]
    Numeric(String),

    #[error("flip budget of {cap} exhausted")]
    BudgetExhausted { cap: u64 },

    #[error("oracle command failed: {0}")]
    Command(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn is_budget_exhausted(&self) -> bool {
        matches!(self, Error::BudgetExhausted { .. })
    }
}
