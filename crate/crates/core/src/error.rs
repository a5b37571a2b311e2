use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input bytes are not valid JSON (or not UTF-8) at the given byte offset.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A record is missing a field or carries the wrong type.
    #[error("{path}: {message}")]
    Field { path: String, message: String },

    #[error("graph is empty: {0}")]
    EmptyGraph(String),

    #[error("unknown entity {0:?}")]
    UnknownEntity(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("graph too small: {0}")]
    TooSmallGraph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An internal contract was broken (NaN inputs, dimension drift, invariant violations).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("remote endpoint failure: {message}")]
    Remote { message: String, retryable: bool },

    #[error("perturbation sample {index} failed: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Field {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Remote { retryable: true, .. })
    }

    /// Innermost error, looking through per-sample wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}
