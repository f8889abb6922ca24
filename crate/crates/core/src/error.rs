use std::path::PathBuf;

use crate::numerics::NumericsError;

/// Crate-wide error. The variant decides the failure class reported by the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("numeric failure: {0}")]
    Numeric(#[from] NumericsError),

    #[error("training diverged in epoch {epoch} (batch rallies: {}): {detail}", rally_ids.join(", "))]
    Diverged {
        epoch: usize,
        rally_ids: Vec<String>,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or usage rather than by
    /// the computation itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Input(_) | Error::Parse { .. } | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
