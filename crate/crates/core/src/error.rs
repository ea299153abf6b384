use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not unitary: ||U^H U - I||_F = {deviation:.3e}")]
    NonUnitary { deviation: f64 },

    #[error("degenerate nulling step at stage {stage}")]
    DegenerateNulling { stage: usize },

    #[error("svd failed: {0}")]
    Svd(String),

    #[error("malformed mesh: {0}")]
    MalformedMesh(String),

    #[error("{0}")]
    Config(String),

    #[error("{path}: {kind}")]
    Format { path: String, kind: FormatError },

    #[error("insufficient samples for class {class}: have {have}, need {need}")]
    InsufficientSamples { class: usize, have: usize, need: usize },

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("verification failed at layer {layer}{}: deviation {deviation:.3e}", .stage.map(|s| format!(", stage {s}")).unwrap_or_default())]
    Verification {
        layer: usize,
        stage: Option<usize>,
        deviation: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Dataset and checkpoint container failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic number 0x{found:08x} (expected 0x{expected:08x})")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated: needed {needed} bytes, file has {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("row size mismatch: file length {len} is not a multiple of {row}")]
    RowSize { len: usize, row: usize },
    #[error("file contains zero samples")]
    Empty,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("{0}")]
    Other(String),
}

pub(crate) fn dims(context: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
