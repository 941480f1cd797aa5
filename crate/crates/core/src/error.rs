use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("cable displacements must sum to zero, got sum {sum:e} m")]
    ZeroSum { sum: f64 },
    #[error("cable {index} displacement {value} m exceeds the limit of {limit} m")]
    OutOfRange {
        index: usize,
        value: f64,
        limit: f64,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("configuration is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("expected {expected} modules, got {got}")]
    ModuleCount { expected: usize, got: usize },
    #[error("negative bend angle {0}")]
    NegativeBend(f64),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid schedule: {0}")]
    Schedule(String),
}
