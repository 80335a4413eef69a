//! Neural right-hand-side models and their training.

pub mod adam;
pub mod dense;
pub mod model;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use dense::{glorot_bound, loss_mse, Dense3, Layer};
pub use model::{input_width, model_inputs, stencil_windows, Architecture, ModelFile, Padding, Provenance, RhsModel, Standardizer};
pub use train::{train, LossHistory, ModelSpec, TrainConfig, TrainingSet};
