//! Neural network engine: tensors, layers, model assembly, training.

pub mod act;
pub mod layers;
pub mod model;
pub mod tensor;

pub use act::{sigmoid, Activation};
pub use model::{build_model, f32_grid, Model, ModelSpec, Param, BN_EPS, BN_MOMENTUM};
pub use tensor::Tensor;
