use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a documented precondition (non-finite point, wrong domain, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric parameter is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Configuration is inconsistent or refers to unknown entities.
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor or grid shapes do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A file could not be decoded.
    #[error("{}: malformed file at byte {offset}: {message}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Misuse of the differentiation graph.
    #[error("graph error: {0}")]
    Graph(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user-supplied data or settings rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Graph(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
