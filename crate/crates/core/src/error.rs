use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by estimation, sampling and reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("direction is not unit-norm (norm = {norm})")]
    NonUnitDirection { norm: f64 },

    /// The sample is too small for the requested confidence and trimming.
    /// `minimal` is expressed in the same unit as `got`.
    #[error("infeasible sizing for {what}: got {got} rows, need at least {minimal}")]
    Sizing {
        what: &'static str,
        got: usize,
        minimal: usize,
    },

    #[error("no analytic marginal oracle for family {0}")]
    NoAnalyticOracle(String),

    #[error("unknown report format {0:?} (expected \"json\" or \"csv\")")]
    UnknownFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
