use std::path::PathBuf;

use thiserror::Error;

use crate::io::gridfile::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("bias-insensitive TLS: p_z = 0 so no bias reaches the target frequency")]
    BiasInsensitive,

    #[error("unfittable region: {0}")]
    Unfittable(String),

    #[error("no eligible TLS: {0}")]
    NoEligible(String),

    #[error("classifier used before training")]
    Untrained,

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("ill-conditioned data: {0}")]
    IllConditioned(String),

    #[error("grid file format: {0}")]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
