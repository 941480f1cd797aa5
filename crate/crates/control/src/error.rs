use std::path::PathBuf;

use softarm_core::{DatasetError, KinematicsError};
use softarm_neural::NeuralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("the learned controller needs a trained controller model")]
    MissingController,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}, line {line}: {message}")]
    LogParse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
