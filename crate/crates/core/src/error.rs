use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the core library.
///
/// The `Display` impl of every variant starts with a stable class prefix
/// (`io:`, `parse:`, `vocab:` ...) so callers can grep for the failure kind.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse: {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("vocab: unknown {kind} `{token}`")]
    UnknownToken { kind: &'static str, token: String },

    #[error("validation: {0}")]
    Validation(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("divergence: non-finite parameter after step {step} ({what})")]
    Divergence { step: usize, what: String },

    #[error("eval: {0}")]
    Eval(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
