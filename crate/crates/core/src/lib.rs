//! Imbalanced node classification with similarity-based candidate
//! selection and a PPO agent that decides which pseudo-labelled nodes to add
//! to the training set.

pub mod baselines;
mod error;
pub mod gnn;
pub mod experiment;
pub mod graph;
pub mod nn;
pub mod rl;
pub mod rng;
pub mod selection;

pub use baselines::BaselineKind;
pub use error::{Error, Result};
pub use gnn::{Arch, EvalReport, GnnModel, LabelledNodes, TrainConfig};
pub use graph::{Graph, Split, SplitSpec};
pub use rl::{PolicyAgent, RlConfig, SelectionEnv};
pub use selection::{CandidateSet, ClassCenter};
pub use experiment::{ExperimentConfig, Method, RunResult};
