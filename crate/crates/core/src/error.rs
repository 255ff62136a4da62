use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input does not follow the declared file layout.
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    /// The layout is fine but a value is not admissible.
    #[error("data error: {0}")]
    Data(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("reference error: {0}")]
    Reference(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("connectivity error: {0}")]
    Connectivity(String),

    #[error("snapping error: cities {cities:?} are farther than {radius_km} km from any network node")]
    Snapping { cities: Vec<usize>, radius_km: f64 },

    #[error("degenerate regression: {0}")]
    Degeneracy(String),

    #[error("geometry error: {0}")]
    Geometry(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Domain(_) | Error::Index { .. } => 2,
            Error::Io { .. }
            | Error::Format { .. }
            | Error::Data(_)
            | Error::Capacity(_)
            | Error::Reference(_) => 3,
            Error::Connectivity(_)
            | Error::Snapping { .. }
            | Error::Degeneracy(_)
            | Error::Geometry(_) => 4,
        }
    }
}
