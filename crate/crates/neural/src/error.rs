use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{op}: shape mismatch on {axis} axis (expected {expected}, got {got})")]
    Shape {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("backward needs a 1x1 output, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("module label needs 1 <= m <= n and n >= 2 (m = {m}, n = {n})")]
    Label { m: usize, n: usize },
    #[error("model has no normalization constants for {0}")]
    MissingNormalization(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("not enough training data: {0}")]
    InsufficientData(String),
    #[error("wrong model kind: expected {expected}, found {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file: {0}")]
    Format(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file checksum mismatch")]
    Checksum,
}
