//! Actor-critic agent trained with the clipped PPO objective.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Checkpoint, DenseMatrix, LayerParams, Mlp, Optimizer, OptimizerConfig};
use crate::rl::reward::Action;
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
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

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            lr: 0.005,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            update_epochs: 4,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            normalize_advantages: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Explore,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub logprob: f64,
    pub value: f64,
}

/// Anything that can choose an action from an encoded state.
pub trait Policy {
    fn decide(&mut self, state: &[f64], mode: Mode) -> Result<Decision>;
}

/// Always takes the same action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub Action);

impl Policy for ConstantPolicy {
    fn decide(&mut self, _state: &[f64], _mode: Mode) -> Result<Decision> {
        Ok(Decision {
            action: self.0,
            logprob: 0.0,
            value: 0.0,
        })
    }
}

/// One environment transition as stored for the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub logprob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Generalised advantage estimates and returns for one complete episode
/// (the value after the last step is zero).
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Log-probabilities of a two-way (or wider) softmax row.
pub fn log_probs(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Clipped-surrogate loss with entropy bonus for a batch, and its gradient
/// with respect to the policy logits:
/// `L = −mean_i min(r_i A_i, clip(r_i) A_i) − c_H · mean_i H_i`.
pub fn policy_loss_and_grad(
    logits: &DenseMatrix,
    actions: &[usize],
    old_logprobs: &[f64],
    advantages: &[f64],
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<(f64, f64, f64, DenseMatrix)> {
    let b = logits.rows();
    let inv_b = 1.0 / b as f64;
    let mut grad = DenseMatrix::zeros(b, logits.cols());
    let mut surrogate = 0.0;
    let mut entropy = 0.0;
    let mut clipped = 0usize;
    for i in 0..b {
        let lp = log_probs(logits.row(i));
        let a = actions[i];
        let ratio = (lp[a] - old_logprobs[i]).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite(format!(
                "PPO ratio {ratio} (log-prob {} vs old {})",
                lp[a], old_logprobs[i]
            )));
        }
        let adv = advantages[i];
        let unclipped = ratio * adv;
        let clipped_term = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
        // d(min)/d(log π_a): r·A while the unclipped term is the minimum.
        let d_logp = if unclipped <= clipped_term {
            unclipped
        } else {
            clipped += 1;
            0.0
        };
        surrogate += unclipped.min(clipped_term);
        let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        let h: f64 = -p.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        entropy += h;
        let row = grad.row_mut(i);
        for j in 0..p.len() {
            let onehot = if j == a { 1.0 } else { 0.0 };
            let d_surr = d_logp * (onehot - p[j]);
            let d_entropy = -p[j] * (lp[j] + h);
            row[j] = -(d_surr + entropy_coef * d_entropy) * inv_b;
        }
    }
    let loss = -(surrogate + entropy_coef * entropy) * inv_b;
    Ok((loss, entropy * inv_b, clipped as f64 * inv_b, grad))
}

/// Policy network (state → 2 logits) and value network (state → 1), each
/// a three-layer MLP with its own Adam optimiser. The set-sum half of the
/// state is multiplied by `set_scale` before entering either network.
#[derive(Debug, Clone)]
pub struct PolicyAgent {
    pub policy: Mlp,
    pub value: Mlp,
    policy_opt: Optimizer,
    value_opt: Optimizer,
    cfg: PpoConfig,
    set_scale: f64,
    rng: Rng,
}

impl PolicyAgent {
    pub fn new(state_dim: usize, cfg: PpoConfig, set_scale: f64, seed: u64) -> Self {
        let h = cfg.hidden_dim;
        let policy = Mlp::new(&[state_dim, h, h, 2], &mut seeded(derive_seed(seed, "policy")));
        let value = Mlp::new(&[state_dim, h, h, 1], &mut seeded(derive_seed(seed, "value")));
        Self {
            policy,
            value,
            policy_opt: Optimizer::new(OptimizerConfig::adam(cfg.lr)),
            value_opt: Optimizer::new(OptimizerConfig::adam(cfg.lr)),
            cfg,
            set_scale,
            rng: seeded(derive_seed(seed, "agent")),
        }
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.policy.input_dim()
    }

    fn prepare(&self, states: &[&[f64]]) -> Result<DenseMatrix> {
        let dim = self.state_dim();
        let half = dim / 2;
        let mut x = DenseMatrix::zeros(states.len(), dim);
        for (i, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::Shape(format!("state has {} entries, agent expects {dim}", s.len())));
            }
            let row = x.row_mut(i);
            for j in 0..dim {
                row[j] = if j < half { s[j] * self.set_scale } else { s[j] };
            }
        }
        Ok(x)
    }

    /// Action probabilities `[reject, accept]`.
    pub fn probabilities(&self, state: &[f64]) -> Result<Vec<f64>> {
        let logits = self.policy.predict(&self.prepare(&[state])?)?;
        Ok(log_probs(logits.row(0)).iter().map(|l| l.exp()).collect())
    }

    pub fn state_value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.value.predict(&self.prepare(&[state])?)?.get(0, 0))
    }

    /// Clipped PPO update over the transitions of one or more episodes.
    /// `advantages` and `returns` are aligned with `batch`.
    pub fn update(&mut self, batch: &[Transition], advantages: &[f64], returns: &[f64]) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("PPO update on an empty batch".into()));
        }
        let mut adv = advantages.to_vec();
        if self.cfg.normalize_advantages && adv.len() > 1 {
            let mean = adv.iter().sum::<f64>() / adv.len() as f64;
            let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / adv.len() as f64;
            let sd = var.sqrt() + 1e-8;
            adv.iter_mut().for_each(|a| *a = (*a - mean) / sd);
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut stats = UpdateStats::default();
        let mut batches = 0usize;
        for _ in 0..self.cfg.update_epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.minibatch_size.max(1)) {
                let states: Vec<&[f64]> = chunk.iter().map(|&i| batch[i].state.as_slice()).collect();
                let x = self.prepare(&states)?;
                let actions: Vec<usize> = chunk.iter().map(|&i| batch[i].action.index()).collect();
                let old: Vec<f64> = chunk.iter().map(|&i| batch[i].logprob).collect();
                let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();

                let logits = self.policy.forward(&x)?;
                let (loss, entropy, clip_frac, grad) = policy_loss_and_grad(
                    &logits,
                    &actions,
                    &old,
                    &a,
                    self.cfg.clip_eps,
                    self.cfg.entropy_coef,
                )?;
                self.policy.backward(&grad)?;
                self.policy_opt.step(&mut self.policy.params_mut());

                let v = self.value.forward(&x)?;
                let inv_b = 1.0 / chunk.len() as f64;
                let mut vgrad = DenseMatrix::zeros(chunk.len(), 1);
                let mut vloss = 0.0;
                for (k, &i) in chunk.iter().enumerate() {
                    let diff = v.get(k, 0) - returns[i];
                    vloss += diff * diff * inv_b;
                    vgrad.set(k, 0, self.cfg.value_coef * 2.0 * diff * inv_b);
                }
                self.value.backward(&vgrad)?;
                self.value_opt.step(&mut self.value.params_mut());

                stats.policy_loss += loss;
                stats.value_loss += vloss;
                stats.entropy += entropy;
                stats.clip_fraction += clip_frac;
                batches += 1;
            }
        }
        let n = batches as f64;
        stats.policy_loss /= n;
        stats.value_loss /= n;
        stats.entropy /= n;
        stats.clip_fraction /= n;
        Ok(stats)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            "ppo-agent",
            serde_json::json!({
                "state_dim": self.state_dim(),
                "set_scale": self.set_scale,
                "config": self.cfg,
            }),
        );
        for (i, l) in self.policy.layers.iter().enumerate() {
            ck.push_layer(&format!("policy.{i}"), l);
        }
        for (i, l) in self.value.layers.iter().enumerate() {
            ck.push_layer(&format!("value.{i}"), l);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, seed: u64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            state_dim: usize,
            set_scale: f64,
            config: PpoConfig,
        }
        let meta: Meta = serde_json::from_value(ck.manifest.meta.clone())?;
        let mut agent = Self::new(meta.state_dim, meta.config, meta.set_scale, seed);
        let load = |prefix: &str| -> Result<Vec<LayerParams>> { (0..3).map(|i| ck.layer(&format!("{prefix}.{i}"))).collect() };
        agent.policy = Mlp::from_layers(load("policy")?);
        agent.value = Mlp::from_layers(load("value")?);
        Ok(agent)
    }
}

impl Policy for PolicyAgent {
    fn decide(&mut self, state: &[f64], mode: Mode) -> Result<Decision> {
        let p = self.probabilities(state)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("policy probabilities {p:?}")));
        }
        let action = match mode {
            Mode::Greedy => Action::from_index(usize::from(p[1] > p[0])),
            Mode::Explore => Action::from_index(usize::from(self.rng.random::<f64>() < p[1])),
        };
        Ok(Decision {
            action,
            logprob: p[action.index()].ln(),
            value: self.state_value(state)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_single_step_and_lambda_zero() {
        let (a, r) = gae(&[1.0], &[0.25], 0.99, 0.95);
        assert_eq!(a, vec![0.75]);
        assert_eq!(r, vec![1.0]);
        let (a, _) = gae(&[1.0, -1.0], &[0.5, 0.5], 0.9, 0.0);
        assert!((a[0] - (1.0 + 0.9 * 0.5 - 0.5)).abs() < 1e-15);
        assert!((a[1] - (-1.5)).abs() < 1e-15);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let agent = PolicyAgent::new(6, PpoConfig { hidden_dim: 8, ..PpoConfig::default() }, 0.5, 1);
        let p = agent.probabilities(&[0.3, -1.0, 2.0, 0.1, 0.0, 5.0]).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!(agent.probabilities(&[0.0; 4]).is_err());
    }

    #[test]
    fn ratio_identity_has_no_clipping() {
        let logits = DenseMatrix::from_rows(&[vec![0.2, -0.1], vec![1.0, 0.5]]).unwrap();
        let old: Vec<f64> = vec![log_probs(logits.row(0))[1], log_probs(logits.row(1))[0]];
        let (_, _, clip, _) = policy_loss_and_grad(&logits, &[1, 0], &old, &[1.0, -2.0], 0.2, 0.0).unwrap();
        assert_eq!(clip, 0.0);
    }

    #[test]
    fn clipped_term_has_zero_gradient() {
        let logits = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        // ratio = 0.5 / 0.25 = 2 > 1.2 with positive advantage: clipped.
        let (_, _, clip, grad) = policy_loss_and_grad(&logits, &[1], &[0.25f64.ln()], &[1.0], 0.2, 0.0).unwrap();
        assert_eq!(clip, 1.0);
        assert_eq!(grad.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn nan_ratio_is_error() {
        let logits = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(policy_loss_and_grad(&logits, &[0], &[f64::NAN], &[1.0], 0.2, 0.0).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let agent = PolicyAgent::new(4, PpoConfig { hidden_dim: 5, ..PpoConfig::default() }, 0.1, 2);
        let back = PolicyAgent::from_checkpoint(&agent.to_checkpoint(), 2).unwrap();
        assert_eq!(back.policy, agent.policy);
        assert_eq!(back.value, agent.value);
    }
}
