use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{
    cross_entropy_weighted, softmax_rows, Activation, Checkpoint, DenseMatrix, Dropout, GcnLayer,
    LayerInput, LayerParams, Optimizer, OptimizerConfig, SageLayer,
};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Sage,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "sage" | "graphsage" => Ok(Arch::Sage),
            other => Err(Error::InvalidArgument(format!("unknown architecture `{other}`"))),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::Sage => "sage",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GraphLayer {
    Gcn(GcnLayer),
    Sage(SageLayer),
}

impl GraphLayer {
    fn new(arch: Arch, fan_in: usize, fan_out: usize, activation: Activation, rng: &mut Rng) -> Self {
        match arch {
            Arch::Gcn => GraphLayer::Gcn(GcnLayer::new(
                LayerParams::glorot(fan_in, fan_out, true, rng),
                activation,
            )),
            Arch::Sage => GraphLayer::Sage(
                SageLayer::new(LayerParams::glorot(2 * fan_in, fan_out, true, rng), activation)
                    .expect("even fan-in"),
            ),
        }
    }

    fn from_params(arch: Arch, params: LayerParams, activation: Activation) -> Result<Self> {
        Ok(match arch {
            Arch::Gcn => GraphLayer::Gcn(GcnLayer::new(params, activation)),
            Arch::Sage => GraphLayer::Sage(SageLayer::new(params, activation)?),
        })
    }

    fn forward(&mut self, input: LayerInput<'_>, graph: &Graph) -> Result<DenseMatrix> {
        match self {
            GraphLayer::Gcn(l) => l.forward(input, graph),
            GraphLayer::Sage(l) => l.forward(input, graph),
        }
    }

    fn apply(&self, input: LayerInput<'_>, graph: &Graph) -> Result<DenseMatrix> {
        match self {
            GraphLayer::Gcn(l) => l.apply(input, graph).map(|(out, _)| out),
            GraphLayer::Sage(l) => l.apply(input, graph).map(|(out, _)| out),
        }
    }

    fn backward(
        &mut self,
        input: LayerInput<'_>,
        graph: &Graph,
        grad: &DenseMatrix,
        need_input_grad: bool,
    ) -> Result<Option<DenseMatrix>> {
        match self {
            GraphLayer::Gcn(l) => l.backward(input, graph, grad, need_input_grad),
            GraphLayer::Sage(l) => l.backward(input, graph, grad, need_input_grad),
        }
    }

    fn params(&self) -> &LayerParams {
        match self {
            GraphLayer::Gcn(l) => &l.params,
            GraphLayer::Sage(l) => &l.params,
        }
    }

    fn params_mut(&mut self) -> &mut LayerParams {
        match self {
            GraphLayer::Gcn(l) => &mut l.params,
            GraphLayer::Sage(l) => &mut l.params,
        }
    }
}

/// Labelled node list; repeated nodes count once per occurrence in the loss.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelledNodes {
    pub nodes: Vec<usize>,
    pub labels: Vec<usize>,
}

impl LabelledNodes {
    pub fn new(nodes: Vec<usize>, labels: Vec<usize>) -> Self {
        debug_assert_eq!(nodes.len(), labels.len());
        Self { nodes, labels }
    }

    /// Nodes labelled with their ground-truth class.
    pub fn from_graph(graph: &Graph, nodes: &[usize]) -> Self {
        Self {
            nodes: nodes.to_vec(),
            labels: nodes.iter().map(|&v| graph.label(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn push(&mut self, node: usize, label: usize) {
        self.nodes.push(node);
        self.labels.push(label);
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Two-layer GNN: `logits = L2(dropout(ReLU(L1(X))))`. The post-ReLU hidden
/// layer is the node embedding.
#[derive(Debug, Clone)]
pub struct GnnModel {
    arch: Arch,
    layer1: GraphLayer,
    layer2: GraphLayer,
    hidden_dim: usize,
    num_classes: usize,
    dropout_rate: f64,
    dropout: Dropout,
    optimizer: Optimizer,
    rng: Rng,
    hidden_cache: Option<DenseMatrix>,
}

impl PartialEq for GnnModel {
    /// Compares architecture and parameters only.
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.layer1.params() == other.layer1.params()
            && self.layer2.params() == other.layer2.params()
    }
}

impl GnnModel {
    pub fn new(
        arch: Arch,
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        dropout_rate: f64,
        optimizer: OptimizerConfig,
        seed: u64,
    ) -> Self {
        let mut rng = seeded(seed);
        let layer1 = GraphLayer::new(arch, input_dim, hidden_dim, Activation::Relu, &mut rng);
        let layer2 = GraphLayer::new(arch, hidden_dim, num_classes, Activation::Identity, &mut rng);
        Self {
            arch,
            layer1,
            layer2,
            hidden_dim,
            num_classes,
            dropout_rate,
            dropout: Dropout::default(),
            optimizer: Optimizer::new(optimizer),
            rng,
            hidden_cache: None,
        }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Restarts the dropout stream; used to make fine-tuned copies
    /// independent of the history of the model they were copied from.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = seeded(seed);
    }

    /// Same parameters with a new optimiser and dropout stream.
    pub fn with_fresh_optimizer(&self, optimizer: OptimizerConfig, seed: u64) -> Self {
        let mut copy = self.clone();
        copy.optimizer = Optimizer::new(optimizer);
        copy.rng = seeded(seed);
        copy.hidden_cache = None;
        copy.layer1.params_mut().zero_grad();
        copy.layer2.params_mut().zero_grad();
        copy
    }

    pub fn layer_params(&self) -> [&LayerParams; 2] {
        [self.layer1.params(), self.layer2.params()]
    }

    fn features(graph: &Graph) -> LayerInput<'_> {
        LayerInput::Sparse(graph.sparse_features())
    }

    fn check_graph(&self, graph: &Graph) -> Result<()> {
        let expected = match self.arch {
            Arch::Gcn => self.layer1.params().fan_in(),
            Arch::Sage => self.layer1.params().fan_in() / 2,
        };
        if graph.feature_dim() != expected {
            return Err(Error::Shape(format!(
                "model expects {expected} features, graph has {}",
                graph.feature_dim()
            )));
        }
        Ok(())
    }

    /// Inference pass (no dropout): `(embeddings, logits)` for every node.
    pub fn infer(&self, graph: &Graph) -> Result<(DenseMatrix, DenseMatrix)> {
        self.check_graph(graph)?;
        let hidden = self.layer1.apply(Self::features(graph), graph)?;
        let logits = self.layer2.apply(LayerInput::Dense(&hidden), graph)?;
        Ok((hidden, logits))
    }

    /// Post-ReLU hidden representation, `num_nodes × hidden_dim`.
    pub fn embed(&self, graph: &Graph) -> Result<DenseMatrix> {
        self.check_graph(graph)?;
        self.layer1.apply(Self::features(graph), graph)
    }

    pub fn logits(&self, graph: &Graph) -> Result<DenseMatrix> {
        Ok(self.infer(graph)?.1)
    }

    pub fn predict_proba(&self, graph: &Graph) -> Result<DenseMatrix> {
        Ok(softmax_rows(&self.logits(graph)?))
    }

    /// Arg-max class for each of `nodes`, ties to the lower class id.
    pub fn pseudo_label(&self, graph: &Graph, nodes: &[usize]) -> Result<Vec<usize>> {
        let logits = self.logits(graph)?;
        Ok(nodes.iter().map(|&v| argmax(logits.row(v))).collect())
    }

    pub fn accuracy(&self, graph: &Graph, eval: &LabelledNodes) -> Result<f64> {
        if eval.is_empty() {
            return Err(Error::InvalidArgument("accuracy over an empty node set".into()));
        }
        let logits = self.logits(graph)?;
        let correct = eval
            .nodes
            .iter()
            .zip(&eval.labels)
            .filter(|(&v, &y)| argmax(logits.row(v)) == y)
            .count();
        Ok(correct as f64 / eval.len() as f64)
    }

    /// Training-mode forward pass with dropout; caches activations.
    pub fn forward_train(&mut self, graph: &Graph) -> Result<DenseMatrix> {
        self.check_graph(graph)?;
        let hidden = self.layer1.forward(Self::features(graph), graph)?;
        let dropped = self
            .dropout
            .forward(&hidden, self.dropout_rate, &mut self.rng, true);
        let logits = self.layer2.forward(LayerInput::Dense(&dropped), graph)?;
        self.hidden_cache = Some(dropped);
        Ok(logits)
    }

    /// Back-propagates `d loss / d logits` (all nodes) into the parameter
    /// gradients.
    pub fn backward(&mut self, graph: &Graph, grad_logits: &DenseMatrix) -> Result<()> {
        let dropped = self
            .hidden_cache
            .take()
            .ok_or_else(|| Error::InvalidState("backward called before forward".into()))?;
        let d_dropped = self
            .layer2
            .backward(LayerInput::Dense(&dropped), graph, grad_logits, true)?
            .expect("input gradient requested");
        let d_hidden = self.dropout.backward(&d_dropped);
        self.layer1
            .backward(Self::features(graph), graph, &d_hidden, false)?;
        Ok(())
    }

    /// One full-batch optimisation step on `train`; returns the loss.
    pub fn train_step(&mut self, graph: &Graph, train: &LabelledNodes, class_weights: &[f64]) -> Result<f64> {
        let logits = self.forward_train(graph)?;
        let selected = logits.select_rows(&train.nodes);
        let out = cross_entropy_weighted(&selected, &train.labels, class_weights)?;
        if !out.loss.is_finite() {
            self.hidden_cache = None;
            return Err(Error::NonFinite(format!(
                "training loss {} after {} optimiser steps",
                out.loss,
                self.optimizer.steps_taken()
            )));
        }
        let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
        for (i, &v) in train.nodes.iter().enumerate() {
            for (g, d) in grad.row_mut(v).iter_mut().zip(out.grad.row(i)) {
                *g += d;
            }
        }
        self.backward(graph, &grad)?;
        let (l1, l2) = (&mut self.layer1, &mut self.layer2);
        self.optimizer
            .step(&mut [l1.params_mut(), l2.params_mut()]);
        Ok(out.loss)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            "gnn",
            serde_json::json!({
                "arch": self.arch,
                "hidden_dim": self.hidden_dim,
                "num_classes": self.num_classes,
                "dropout": self.dropout_rate,
            }),
        );
        ck.push_layer("layer1", self.layer1.params());
        ck.push_layer("layer2", self.layer2.params());
        ck
    }

    /// Restores parameters; optimiser state starts fresh.
    pub fn from_checkpoint(ck: &Checkpoint, optimizer: OptimizerConfig, seed: u64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            arch: Arch,
            hidden_dim: usize,
            num_classes: usize,
            dropout: f64,
        }
        let meta: Meta = serde_json::from_value(ck.manifest.meta.clone())?;
        let layer1 = GraphLayer::from_params(meta.arch, ck.layer("layer1")?, Activation::Relu)?;
        let layer2 = GraphLayer::from_params(meta.arch, ck.layer("layer2")?, Activation::Identity)?;
        Ok(Self {
            arch: meta.arch,
            layer1,
            layer2,
            hidden_dim: meta.hidden_dim,
            num_classes: meta.num_classes,
            dropout_rate: meta.dropout,
            dropout: Dropout::default(),
            optimizer: Optimizer::new(optimizer),
            rng: seeded(seed),
            hidden_cache: None,
        })
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
