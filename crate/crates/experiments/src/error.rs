use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ExpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] imc_core::Error),

    #[error("configuration: {0}")]
    Config(String),

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

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl ExpError {
    pub fn config(msg: impl Into<String>) -> Self {
        ExpError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExpError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        ExpError::Csv {
            path: path.into(),
            source,
        }
    }
}
