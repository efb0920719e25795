use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::metrics::EvalReport;
use crate::gnn::model::{Arch, GnnModel, LabelledNodes};
use crate::graph::Graph;
use crate::nn::{cross_entropy_weighted, softmax_rows, OptimizerConfig, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            lr: 0.01,
            weight_decay: 5e-4,
            optimizer: OptimizerKind::Adam,
            dropout: 0.5,
            max_epochs: 2000,
            patience: 100,
        }
    }
}

impl TrainConfig {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        let base = match self.optimizer {
            OptimizerKind::Sgd => OptimizerConfig::sgd(self.lr),
            OptimizerKind::Adam => OptimizerConfig::adam(self.lr),
        };
        base.with_weight_decay(self.weight_decay)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.hidden_dim == 0 || !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Config("hidden_dim and lr must be positive, weight_decay ≥ 0".into()));
        }
        Ok(())
    }

    pub fn new_model(&self, arch: Arch, graph: &Graph, seed: u64) -> GnnModel {
        GnnModel::new(
            arch,
            graph.feature_dim(),
            self.hidden_dim,
            graph.num_classes(),
            self.dropout,
            self.optimizer_config(),
            seed,
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation checkpoint.
    pub model: GnnModel,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub best_val_loss: f64,
    pub epochs_run: usize,
}

/// Accuracy and mean cross-entropy of `model` on `eval` (inference mode).
pub fn val_metrics(model: &GnnModel, graph: &Graph, eval: &LabelledNodes) -> Result<(f64, f64)> {
    let logits = model.logits(graph)?.select_rows(&eval.nodes);
    let loss = cross_entropy_weighted(&logits, &eval.labels, &vec![1.0; graph.num_classes()])?.loss;
    let report = EvalReport::from_scores(&softmax_rows(&logits), &eval.labels)?;
    Ok((report.acc, loss))
}

pub fn evaluate(model: &GnnModel, graph: &Graph, eval: &LabelledNodes) -> Result<EvalReport> {
    if eval.is_empty() {
        return Err(Error::InvalidArgument("evaluation over an empty node set".into()));
    }
    let probs = model.predict_proba(graph)?.select_rows(&eval.nodes);
    EvalReport::from_scores(&probs, &eval.labels)
}

fn check_labels(graph: &Graph, set: &LabelledNodes, what: &str) -> Result<()> {
    let n = graph.num_nodes();
    let m = graph.num_classes();
    for (&v, &y) in set.nodes.iter().zip(&set.labels) {
        if v >= n || y >= m {
            return Err(Error::InvalidArgument(format!(
                "{what} entry (node {v}, label {y}) out of range for {n} nodes / {m} classes"
            )));
        }
    }
    Ok(())
}

/// Full-batch training with early stopping on validation accuracy (ties
/// broken by lower validation loss). The untrained model counts as epoch 0,
/// so the result is never worse on validation than the initialisation.
pub fn train(
    graph: &Graph,
    arch: Arch,
    train_set: &LabelledNodes,
    val_set: &LabelledNodes,
    cfg: &TrainConfig,
    class_weights: Option<&[f64]>,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if val_set.is_empty() {
        return Err(Error::InvalidArgument("empty validation set".into()));
    }
    check_labels(graph, train_set, "train")?;
    check_labels(graph, val_set, "validation")?;
    let unit = vec![1.0; graph.num_classes()];
    let weights = class_weights.unwrap_or(&unit);

    let mut model = cfg.new_model(arch, graph, seed);
    let (acc0, loss0) = val_metrics(&model, graph, val_set)?;
    let mut best = TrainOutcome {
        model: model.clone(),
        best_epoch: 0,
        best_val_acc: acc0,
        best_val_loss: loss0,
        epochs_run: 0,
    };
    for epoch in 1..=cfg.max_epochs {
        if epoch - best.best_epoch > cfg.patience {
            break;
        }
        model.train_step(graph, train_set, weights)?;
        best.epochs_run = epoch;
        let (acc, loss) = val_metrics(&model, graph, val_set)?;
        if acc > best.best_val_acc || (acc == best.best_val_acc && loss < best.best_val_loss) {
            best.model = model.clone();
            best.best_epoch = epoch;
            best.best_val_acc = acc;
            best.best_val_loss = loss;
        }
    }
    log::debug!(
        "trained {arch} for {} epochs, best epoch {} (val acc {:.4})",
        best.epochs_run,
        best.best_epoch,
        best.best_val_acc
    );
    Ok(best)
}

/// Copy of `model` trained for a fixed number of epochs on `train_set`
/// with a fresh optimiser; the original is untouched.
pub fn fine_tune(
    model: &GnnModel,
    graph: &Graph,
    train_set: &LabelledNodes,
    epochs: usize,
    optimizer: OptimizerConfig,
    seed: u64,
) -> Result<GnnModel> {
    let mut copy = model.with_fresh_optimizer(optimizer, seed);
    for _ in 0..epochs {
        copy.train_step(graph, train_set, &vec![1.0; graph.num_classes()])?;
    }
    Ok(copy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_synthetic_graph, SyntheticSpec};

    fn cliques() -> Graph {
        make_synthetic_graph(&SyntheticSpec::new(20, 2, 1.0, 0.0, 4, 0)).unwrap()
    }

    fn sets(g: &Graph) -> (LabelledNodes, LabelledNodes) {
        (
            LabelledNodes::from_graph(g, &[0, 10]),
            LabelledNodes::from_graph(g, &[1, 2, 3, 11, 12, 13]),
        )
    }

    #[test]
    fn separable_fixture_reaches_full_val_accuracy() {
        let g = cliques();
        let (tr, va) = sets(&g);
        let cfg = TrainConfig {
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let out = train(&g, Arch::Gcn, &tr, &va, &cfg, None, 1).unwrap();
        assert_eq!(out.best_val_acc, 1.0);
        let all: Vec<usize> = (0..20).collect();
        let labels = out.model.pseudo_label(&g, &all).unwrap();
        assert_eq!(labels, g.labels());
    }

    #[test]
    fn zero_patience_returns_initial_model() {
        let g = cliques();
        let (tr, va) = sets(&g);
        let cfg = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        let out = train(&g, Arch::Sage, &tr, &va, &cfg, None, 4).unwrap();
        assert_eq!(out.epochs_run, 0);
        assert_eq!(out.model, cfg.new_model(Arch::Sage, &g, 4));
    }

    #[test]
    fn deterministic_and_unit_weights_match_default() {
        let g = cliques();
        let (tr, va) = sets(&g);
        let cfg = TrainConfig {
            max_epochs: 30,
            patience: 30,
            ..TrainConfig::default()
        };
        let a = train(&g, Arch::Gcn, &tr, &va, &cfg, None, 7).unwrap();
        let b = train(&g, Arch::Gcn, &tr, &va, &cfg, Some(&[1.0, 1.0]), 7).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn zero_epoch_fine_tune_is_identity() {
        let g = cliques();
        let (tr, _) = sets(&g);
        let m = TrainConfig::default().new_model(Arch::Gcn, &g, 0);
        let ft = fine_tune(&m, &g, &tr, 0, OptimizerConfig::sgd(0.1), 1).unwrap();
        assert_eq!(ft, m);
    }

    #[test]
    fn rejects_bad_config_and_sets() {
        let g = cliques();
        let (tr, va) = sets(&g);
        let bad = TrainConfig {
            patience: 10,
            max_epochs: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&g, Arch::Gcn, &tr, &va, &bad, None, 0), Err(Error::Config(_))));
        let empty = LabelledNodes::default();
        assert!(train(&g, Arch::Gcn, &tr, &empty, &TrainConfig::default(), None, 0).is_err());
        let oob = LabelledNodes::new(vec![0], vec![5]);
        assert!(train(&g, Arch::Gcn, &oob, &va, &TrainConfig::default(), None, 0).is_err());
    }
}
