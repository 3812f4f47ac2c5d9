use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration error at step {step}: {detail}")]
    Integration { step: usize, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("combination error: {0}")]
    Combination(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid spike record: {0}")]
    InvalidRecord(String),

    #[error("{path}: line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("malformed {kind} file: {detail}")]
    Format { kind: &'static str, detail: String },

    #[error("model version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
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
}
