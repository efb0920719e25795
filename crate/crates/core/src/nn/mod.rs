//! Minimal dense numerical stack: matrices, graph layers and MLPs with
//! analytic gradients, losses, dropout, optimizers and checkpoints.

pub mod checkpoint;
mod dropout;
mod layers;
mod loss;
mod matrix;
mod mlp;
mod optim;
mod params;
mod sparse;

pub use checkpoint::Checkpoint;
pub use dropout::Dropout;
pub use layers::{Activation, GcnLayer, LayerInput, SageLayer};
pub use loss::{cross_entropy_weighted, log_softmax, softmax_inplace, softmax_rows, LossOutput};
pub use matrix::DenseMatrix;
pub use mlp::Mlp;
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::LayerParams;
pub use sparse::SparseMatrix;
