use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analytic models and input validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ConfigError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ConfigError::Io {
            path: path.into(),
            source,
        }
    }
}
