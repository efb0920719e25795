//! Sequential candidate selection as a Markov decision process: the
//! environment walks the candidate list, an actor-critic agent decides to
//! accept or reject each node, and rewards compare the accuracy of a
//! fine-tuned classifier against a moving baseline.

mod agent;
mod env;
mod reward;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use agent::{
    gae, log_probs, policy_loss_and_grad, ConstantPolicy, Decision, Mode, Policy, PolicyAgent, PpoConfig,
    Transition, UpdateStats,
};
pub use env::{EnvConfig, EnvState, SelectionEnv, StepOutcome};
pub use reward::{reward, Action, RewardTracker};

use crate::error::{Error, Result};
use crate::gnn::LabelledNodes;
use crate::nn::{OptimizerConfig, OptimizerKind};
use crate::selection::Candidate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    /// Exploration episodes, each followed by a PPO update.
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub finetune_optimizer: OptimizerKind,
    pub reward_window: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
}

impl Default for RlConfig {
    fn default() -> Self {
        let ppo = PpoConfig::default();
        Self {
            epochs: 50,
            finetune_epochs: 10,
            finetune_lr: 0.01,
            finetune_optimizer: OptimizerKind::Adam,
            reward_window: 10,
            hidden_dim: ppo.hidden_dim,
            lr: ppo.lr,
            clip_eps: ppo.clip_eps,
            gamma: ppo.gamma,
            gae_lambda: ppo.gae_lambda,
            update_epochs: ppo.update_epochs,
            minibatch_size: ppo.minibatch_size,
            value_coef: ppo.value_coef,
            entropy_coef: ppo.entropy_coef,
            normalize_advantages: ppo.normalize_advantages,
        }
    }
}

impl RlConfig {
    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            hidden_dim: self.hidden_dim,
            lr: self.lr,
            clip_eps: self.clip_eps,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            update_epochs: self.update_epochs,
            minibatch_size: self.minibatch_size,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            normalize_advantages: self.normalize_advantages,
        }
    }

    pub fn env(&self) -> EnvConfig {
        let opt = match self.finetune_optimizer {
            OptimizerKind::Sgd => OptimizerConfig::sgd(self.finetune_lr),
            OptimizerKind::Adam => OptimizerConfig::adam(self.finetune_lr),
        };
        EnvConfig {
            finetune_epochs: self.finetune_epochs,
            finetune_optimizer: opt,
            reward_window: self.reward_window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!("rl.clip_eps {} outside (0, 1)", self.clip_eps)));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("rl.gamma and rl.gae_lambda must lie in [0, 1]".into()));
        }
        if self.reward_window == 0 || self.hidden_dim == 0 || self.minibatch_size == 0 {
            return Err(Error::Config("rl.reward_window, rl.hidden_dim and rl.minibatch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.finetune_lr > 0.0) {
            return Err(Error::Config("rl.lr and rl.finetune_lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub transitions: Vec<Transition>,
    pub steps: Vec<StepOutcome>,
    pub accepted: Vec<Candidate>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// One pass over the whole candidate list.
pub fn run_episode(policy: &mut impl Policy, env: &mut SelectionEnv<'_>, mode: Mode, episode: u64) -> Result<Trajectory> {
    let mut state = env.reset(episode);
    let mut transitions = Vec::with_capacity(env.candidates().len());
    let mut steps = Vec::with_capacity(env.candidates().len());
    while !env.is_done() {
        let d = policy.decide(&state, mode)?;
        let out = env.step(d.action)?;
        transitions.push(Transition {
            state,
            action: d.action,
            reward: out.reward,
            logprob: d.logprob,
            value: d.value,
        });
        steps.push(out);
        state = env.encoding();
    }
    Ok(Trajectory {
        mode,
        transitions,
        steps,
        accepted: env.accepted().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub accepted: usize,
    pub total_reward: f64,
    pub update: Option<UpdateStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supplement {
    /// Accepted nodes with their pseudo-labels.
    pub nodes: LabelledNodes,
    /// Accepted count per class id.
    pub per_class: Vec<usize>,
    pub greedy: Trajectory,
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Serialize)]
struct LogLine<'a> {
    episode: usize,
    mode: &'a Mode,
    t: usize,
    node_id: usize,
    class: usize,
    action: Action,
    acc_t: f64,
    b_t: f64,
    reward: f64,
}

fn write_log(log: &mut dyn Write, episode: usize, traj: &Trajectory) -> Result<()> {
    for s in &traj.steps {
        let line = LogLine {
            episode,
            mode: &traj.mode,
            t: s.t,
            node_id: s.candidate.node,
            class: s.candidate.class,
            action: s.action,
            acc_t: s.acc,
            b_t: s.baseline,
            reward: s.reward,
        };
        serde_json::to_writer(&mut *log, &line)?;
        writeln!(log).map_err(|e| Error::io("trajectory log", e))?;
    }
    Ok(())
}

/// `n_explore` sampled episodes, each followed by a PPO update, then one
/// greedy episode whose accepted nodes form the supplement.
pub fn select_supplement(
    agent: &mut PolicyAgent,
    env: &mut SelectionEnv<'_>,
    n_explore: usize,
    num_classes: usize,
    mut log: Option<&mut dyn Write>,
) -> Result<Supplement> {
    let mut episodes = Vec::with_capacity(n_explore);
    if !env.candidates().is_empty() {
        for ep in 0..n_explore {
            let traj = run_episode(agent, env, Mode::Explore, ep as u64)?;
            if let Some(log) = log.as_deref_mut() {
                write_log(log, ep, &traj)?;
            }
            let rewards: Vec<f64> = traj.transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = traj.transitions.iter().map(|t| t.value).collect();
            let cfg = *agent.config();
            let (adv, ret) = gae(&rewards, &values, cfg.gamma, cfg.gae_lambda);
            let stats = agent.update(&traj.transitions, &adv, &ret)?;
            log::debug!(
                "episode {ep}: accepted {}/{} reward {:+} entropy {:.3}",
                traj.accepted.len(),
                traj.len(),
                traj.total_reward(),
                stats.entropy
            );
            episodes.push(EpisodeSummary {
                episode: ep,
                accepted: traj.accepted.len(),
                total_reward: traj.total_reward(),
                update: Some(stats),
            });
        }
    }
    let greedy = run_episode(agent, env, Mode::Greedy, n_explore as u64)?;
    if let Some(log) = log.as_deref_mut() {
        write_log(log, n_explore, &greedy)?;
    }
    let mut nodes = LabelledNodes::default();
    let mut per_class = vec![0; num_classes];
    for c in &greedy.accepted {
        nodes.push(c.node, c.class);
        per_class[c.class] += 1;
    }
    Ok(Supplement {
        nodes,
        per_class,
        greedy,
        episodes,
    })
}
