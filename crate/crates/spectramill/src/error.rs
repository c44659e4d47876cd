//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration or invalid parameter values.
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents: bad magic, version, or field layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// Input that cannot be processed, e.g. a constant spectrum.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code class: 2 config, 3 I/O or data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape { .. } => 2,
            Error::Io { .. } | Error::Format(_) | Error::Degenerate(_) => 3,
            Error::Diverged { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
