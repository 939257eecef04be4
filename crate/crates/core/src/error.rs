use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: face references vertex {index} but only {count} are defined")]
    IndexOutOfBounds {
        path: String,
        line: usize,
        index: i64,
        count: usize,
    },

    #[error("mesh has no texture coordinates (UVs are required for baking)")]
    MissingUvs,

    #[error("unsupported image format, magic bytes {magic:?}")]
    UnsupportedFormat { magic: String },

    #[error("environment probe carries no energy and cannot be importance sampled")]
    ZeroEnergyProbe,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("optimization diverged at iteration {iteration} (non-finite loss, gradient or parameters)")]
    Divergence { iteration: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
