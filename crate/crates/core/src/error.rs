use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer {index} ({kind}): {message}")]
    Layer {
        index: usize,
        kind: String,
        message: String,
    },

    #[error("unknown layer kind: {0}")]
    UnknownLayerKind(String),

    #[error("no propagation rule assigned for layer kind {0}")]
    RuleMissing(String),

    #[error("model manifest: {0}")]
    Manifest(String),

    #[error("blob shorter than manifest requires: need {needed} bytes, found {actual}")]
    BlobTooShort { needed: u64, actual: u64 },

    #[error("blob checksum mismatch: manifest says {expected:#010x}, blob hashes to {actual:#010x}")]
    ChecksumMismatch { expected: u32, actual: u32 },

    #[error("wav: {0}")]
    Wav(String),

    #[error("clip cache: {0}")]
    Cache(String),

    #[error("metadata: {0}")]
    Metadata(String),

    #[error("relevance map file: {0}")]
    MapFile(String),

    #[error("empty class group: {0}")]
    EmptyGroup(String),

    #[error("degenerate grouping: {0}")]
    DegenerateGrouping(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
