use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("preconditioner failure: {0}")]
    Preconditioner(String),
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
