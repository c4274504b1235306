use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("non-finite value in {context}: {detail}")]
    Numeric { context: String, detail: String },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("solver failure at t = {time} s: {detail}")]
    Solver { time: f64, detail: String },

    #[error("sampling error: requested {requested} points but only {available} are available")]
    Sampling { requested: usize, available: usize },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("training aborted at step {step}: {detail}")]
    Training {
        step: usize,
        detail: String,
        /// Parameters from the last step whose loss was finite.
        last_good: Option<Box<crate::diffnet::NetworkParams>>,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension { .. } => "dimension",
            Error::Numeric { .. } => "numeric",
            Error::Domain { .. } => "domain",
            Error::Solver { .. } => "solver",
            Error::Sampling { .. } => "sampling",
            Error::Metric(_) => "metric",
            Error::Training { .. } => "training",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
