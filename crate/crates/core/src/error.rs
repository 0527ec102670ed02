use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("matrix is singular over GF(2)")]
    Singular,

    #[error("value {0} is not a bit (expected 0 or 1)")]
    NotABit(u8),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format version {found:?} (expected {expected:?})")]
    UnsupportedVersion { expected: String, found: String },

    #[error("key kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("refusing to overwrite {0} (pass --force)")]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dims(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
