//! Learned models for the soft arm: a small reverse-mode autodiff, the
//! module-axis biLSTM used by both the forward model and the controller,
//! training, and a checksummed model file format.

pub mod adam;
pub mod bilstm;
mod error;
pub mod model;
pub mod norm;
pub mod tape;
pub mod train;

pub use bilstm::{module_label, sum_and_range, BiLstmSpec, BiLstmWeights};
pub use error::NeuralError;
pub use model::{
    controller_input, model_load, model_save, nn_c2a_forward, nn_c2s_forward, ControllerInput,
    ModelBundle, ModelKind, C2A_FEATURES,
};
pub use norm::Normalizer;
pub use tape::{Graph, Var};
pub use train::{train_c2a, train_c2s, TrainConfig, TrainReport};
