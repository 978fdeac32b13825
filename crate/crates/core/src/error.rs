use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to load {what}: {reason}")]
    Load { what: String, reason: String },
    #[error("parse error in {file} at line {line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("unsupported extent: {0}")]
    UnsupportedExtent(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("reconstruction error: {0}")]
    Reconstruction(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("scene error: {0}")]
    Scene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}
