use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("pose ({x:.3}, {y:.3}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("rotated map origins are not supported (theta = {0})")]
    RotatedOrigin(f64),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PGM {path}: {reason}")]
    PgmFormat { path: PathBuf, reason: String },

    #[error("malformed map YAML {path}: {reason}")]
    YamlFormat { path: PathBuf, reason: String },

    #[error("unknown map YAML key `{key}` in {path}")]
    UnknownYamlKey { path: PathBuf, key: String },

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("unknown goal handle {0}")]
    UnknownGoal(u64),

    #[error("config error: {0}")]
    Config(String),

    #[error("connection: {0}")]
    Connection(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
