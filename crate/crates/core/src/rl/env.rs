use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{fine_tune, val_metrics, GnnModel, LabelledNodes};
use crate::graph::Graph;
use crate::nn::{DenseMatrix, OptimizerConfig};
use crate::rl::reward::{reward, Action, RewardTracker};
use crate::rng::derive_seed_indexed;
use crate::selection::{Candidate, CandidateSet};

/// Training set so far plus the position in the candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub train: LabelledNodes,
    pub cursor: usize,
    /// Sum of the embeddings of every node in `train`.
    pub set_sum: Vec<f64>,
}

impl EnvState {
    pub fn new(train: LabelledNodes, embeddings: &DenseMatrix) -> Self {
        let mut set_sum = vec![0.0; embeddings.cols()];
        for &v in &train.nodes {
            for (s, z) in set_sum.iter_mut().zip(embeddings.row(v)) {
                *s += z;
            }
        }
        Self { train, cursor: 0, set_sum }
    }

    /// `[Σ_{v ∈ V_t} z_v ; z_{u_t}]`; the second half is zero once the
    /// candidate list is exhausted.
    pub fn encoding(&self, embeddings: &DenseMatrix, candidates: &CandidateSet) -> Vec<f64> {
        let mut out = self.set_sum.clone();
        match candidates.entries.get(self.cursor) {
            Some(c) => out.extend_from_slice(embeddings.row(c.node)),
            None => out.extend(std::iter::repeat_n(0.0, embeddings.cols())),
        }
        out
    }

    fn add(&mut self, node: usize, label: usize, embeddings: &DenseMatrix) {
        self.train.push(node, label);
        for (s, z) in self.set_sum.iter_mut().zip(embeddings.row(node)) {
            *s += z;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Epochs used to fine-tune the committed classifier when scoring a
    /// candidate.
    pub finetune_epochs: usize,
    pub finetune_optimizer: OptimizerConfig,
    pub reward_window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub t: usize,
    pub candidate: Candidate,
    pub action: Action,
    pub acc: f64,
    pub baseline: f64,
    pub reward: f64,
    pub done: bool,
}

/// Sequential pass over the candidate list. At each step the committed
/// classifier is fine-tuned on `V_t ∪ {u_t}` to score the candidate
/// regardless of the action; only accepted candidates change the committed
/// classifier and the training set.
pub struct SelectionEnv<'a> {
    graph: &'a Graph,
    embeddings: &'a DenseMatrix,
    candidates: &'a CandidateSet,
    initial_train: LabelledNodes,
    val: LabelledNodes,
    initial_model: GnnModel,
    acc0: f64,
    cfg: EnvConfig,
    seed: u64,
    episode: u64,
    state: EnvState,
    committed: GnnModel,
    tracker: RewardTracker,
    accepted: Vec<Candidate>,
}

impl<'a> SelectionEnv<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        graph: &'a Graph,
        embeddings: &'a DenseMatrix,
        candidates: &'a CandidateSet,
        train: LabelledNodes,
        val: LabelledNodes,
        model: GnnModel,
        cfg: EnvConfig,
        seed: u64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("empty labelled training set".into()));
        }
        if embeddings.rows() != graph.num_nodes() {
            return Err(Error::Shape(format!(
                "{} embedding rows for {} nodes",
                embeddings.rows(),
                graph.num_nodes()
            )));
        }
        let (acc0, _) = val_metrics(&model, graph, &val)?;
        let state = EnvState::new(train.clone(), embeddings);
        Ok(Self {
            graph,
            embeddings,
            candidates,
            initial_train: train,
            val,
            committed: model.clone(),
            initial_model: model,
            acc0,
            cfg,
            seed,
            episode: 0,
            state,
            tracker: RewardTracker::new(acc0, cfg.reward_window),
            accepted: Vec::new(),
        })
    }

    pub fn acc0(&self) -> f64 {
        self.acc0
    }

    pub fn candidates(&self) -> &CandidateSet {
        self.candidates
    }

    pub fn state_dim(&self) -> usize {
        2 * self.embeddings.cols()
    }

    pub fn labelled_count(&self) -> usize {
        self.initial_train.len()
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn encoding(&self) -> Vec<f64> {
        self.state.encoding(self.embeddings, self.candidates)
    }

    pub fn is_done(&self) -> bool {
        self.state.cursor >= self.candidates.len()
    }

    pub fn accepted(&self) -> &[Candidate] {
        &self.accepted
    }

    pub fn tracker(&self) -> &RewardTracker {
        &self.tracker
    }

    /// Restores `V_0 = V_L`, the initial classifier and a fresh baseline;
    /// `episode` keys the fine-tuning randomness.
    pub fn reset(&mut self, episode: u64) -> Vec<f64> {
        self.episode = episode;
        self.state = EnvState::new(self.initial_train.clone(), self.embeddings);
        self.committed = self.initial_model.clone();
        self.tracker = RewardTracker::new(self.acc0, self.cfg.reward_window);
        self.accepted.clear();
        self.encoding()
    }

    /// Validation accuracy of the committed classifier fine-tuned on
    /// `train`, together with the fine-tuned model.
    pub fn reward_eval(&self, train: &LabelledNodes) -> Result<(f64, GnnModel)> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        let seed = derive_seed_indexed(self.seed, "reward-eval", &[self.episode, self.state.cursor as u64]);
        let tuned = fine_tune(
            &self.committed,
            self.graph,
            train,
            self.cfg.finetune_epochs,
            self.cfg.finetune_optimizer,
            seed,
        )?;
        let (acc, _) = val_metrics(&tuned, self.graph, &self.val)?;
        Ok((acc, tuned))
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let candidate = *self
            .candidates
            .entries
            .get(self.state.cursor)
            .ok_or_else(|| Error::InvalidState("step called after the episode finished".into()))?;
        let mut trial = self.state.train.clone();
        trial.push(candidate.node, candidate.class);
        let (acc, tuned) = self.reward_eval(&trial)?;
        let baseline = self.tracker.baseline();
        let r = reward(acc, baseline, action);
        self.tracker.push(acc);
        if action == Action::Accept {
            self.state.add(candidate.node, candidate.class, self.embeddings);
            self.committed = tuned;
            self.accepted.push(candidate);
        }
        let t = self.state.cursor;
        self.state.cursor += 1;
        Ok(StepOutcome {
            t,
            candidate,
            action,
            acc,
            baseline,
            reward: r,
            done: self.is_done(),
        })
    }
}
