use std::path::PathBuf;

/// Errors produced anywhere in the fitting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller violated an operation precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data is malformed or unsuitable (bad mesh, empty sets, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite value appeared in a numeric computation.
    #[error("numeric overflow in `{op}`")]
    NonFinite { op: String },

    /// Checkpoint or cache does not match the requested configuration.
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from numeric failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }

    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
