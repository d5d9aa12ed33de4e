use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A value left the domain where the operation is defined (non-finite
    /// evaluation, non-positive step, ...).
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("{operation} needs a gradient oracle but `{piece}` is prox-only")]
    UnsupportedOracle {
        operation: &'static str,
        piece: &'static str,
    },

    #[error("power iteration did not converge in {iterations} iterations (best estimate {best})")]
    NoConvergence { iterations: usize, best: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("{quantity} exceeded {limit:e} at index {index}")]
    Overflow {
        quantity: &'static str,
        index: usize,
        limit: f64,
    },

    #[error("integrated sequences drifted from the raw parameters at index {index}: {quantity} off by {relative:e}")]
    Drift {
        quantity: &'static str,
        index: usize,
        relative: f64,
    },

    #[error("ode right-hand side failed at time {time}: {reason}")]
    OdeDomain { time: f64, reason: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
