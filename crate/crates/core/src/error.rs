use std::path::PathBuf;

use crate::extraction::ValidationError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("fetch failed for {month}: {message}")]
    Fetch { month: String, message: String },

    #[error("malformed payload for {month}: {message}")]
    Payload { month: String, message: String },

    #[error("metric undefined: {0}")]
    MetricUndefined(&'static str),

    #[error("missing inputs: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingInput(Vec<PathBuf>),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::Fetch { .. } => "fetch",
            Error::Payload { .. } => "payload",
            Error::MetricUndefined(_) => "metric_undefined",
            Error::MissingInput(_) => "missing_input",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
