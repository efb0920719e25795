//! Two-layer GCN / GraphSAGE node classifier: training with early stopping,
//! embeddings, pseudo-labels and evaluation metrics.

pub mod metrics;
mod model;
mod train;

pub use metrics::EvalReport;
pub use model::{argmax, Arch, GnnModel, LabelledNodes};
pub use train::{evaluate, fine_tune, train, val_metrics, TrainConfig, TrainOutcome};
