use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by tensor/image IO, shape checks, and parameter validation.
#[derive(Debug, Error)]
pub enum AmlError {
    #[error("bad magic: expected \"AMLT\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported tensor format version {found} (expected {expected})")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("unsupported dtype byte {found} (only f32 = 0x01 is supported)")]
    DtypeMismatch { found: u8 },

    #[error("truncated payload: needed {needed} more bytes")]
    Truncated { needed: usize },

    #[error("trailing data after tensor payload ({extra} bytes)")]
    TrailingData { extra: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("mask not binary: pixel value {value} (expected 0 or 255)")]
    MaskNotBinary { value: u8 },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("pixel ({row}, {col}) out of bounds for {height}x{width}")]
    OutOfBounds {
        row: u32,
        col: u32,
        height: usize,
        width: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AmlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AmlError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, AmlError>;
