use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient: {deficient} of {cols} columns are linearly dependent")]
    RankDeficient { deficient: usize, cols: usize },

    #[error("SVD failed to converge on a {rows}x{cols} matrix")]
    SvdFailed { rows: usize, cols: usize },

    #[error("{what} is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { what: &'static str, deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "solver diverged at iteration {iter}: loss {loss:.3e} exceeds {limit:.0e} x initial loss \
         {initial:.3e}; step size eta = {step_size:.3e} is too large"
    )]
    Diverged {
        iter: usize,
        loss: f64,
        initial: f64,
        limit: f64,
        step_size: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
