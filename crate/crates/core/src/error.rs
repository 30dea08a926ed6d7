use std::io;
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported shape: {rows}x{cols} (rows must not exceed cols)")]
    UnsupportedShape { rows: usize, cols: usize },

    #[error("svd failed to converge")]
    Svd,

    #[error(transparent)]
    Denoiser(#[from] DenoiserError),

    #[error("pgm {path}: {reason}")]
    Pgm { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Failures of an out-of-process denoiser. Each is a distinct value so callers
/// can report what went wrong with the subprocess.
#[derive(Debug, Error)]
pub enum DenoiserError {
    #[error("failed to spawn denoiser {path}: {source}")]
    Spawn {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("denoiser protocol violation: {0}")]
    Protocol(String),

    #[error("denoiser did not answer within {0:?}")]
    Timeout(Duration),

    #[error("denoiser i/o: {0}")]
    Io(#[from] io::Error),

    #[error("denoiser input: {0}")]
    Input(String),
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
