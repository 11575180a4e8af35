use thiserror::Error;

/// Protocol-level failures raised while building, decoding or fusing
/// attestation state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("bitmask length mismatch: expected {expected} cells, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cell {index} holds the reserved code 01")]
    MalformedCell { index: usize },
    #[error("prover {node} has not completed a self-attestation yet")]
    NotAttested { node: usize },
    #[error("wire message has {found} bytes, expected {expected}")]
    WireLength { expected: usize, found: usize },
    #[error("wire message has non-zero padding bits")]
    NonZeroPadding,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("verifier query failed: {0}")]
    QueryFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
