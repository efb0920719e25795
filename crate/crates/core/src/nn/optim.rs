use serde::{Deserialize, Serialize};

use super::params::LayerParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(crate::Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// L2 penalty added to the gradient.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(lr)
        }
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }
}

/// SGD or Adam over an ordered list of parameter slots. Moment buffers are
/// created on the first step and matched to slots by position.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every slot of `layers` and clears their gradients.
    pub fn step(&mut self, layers: &mut [&mut LayerParams]) {
        self.step += 1;
        let cfg = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        let mut slot_index = 0;
        for layer in layers.iter_mut() {
            for (param, grad) in layer.slots() {
                if self.moments.len() <= slot_index {
                    self.moments
                        .push((vec![0.0; param.len()], vec![0.0; param.len()]));
                }
                let (m, v) = &mut self.moments[slot_index];
                slot_index += 1;
                for i in 0..param.len() {
                    let g = grad.map_or(0.0, |g| g[i]) + cfg.weight_decay * param[i];
                    match cfg.kind {
                        OptimizerKind::Sgd => param[i] -= cfg.lr * g,
                        OptimizerKind::Adam => {
                            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                            let m_hat = m[i] / bias1;
                            let v_hat = v[i] / bias2;
                            param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
                        }
                    }
                }
            }
            layer.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseMatrix;

    fn quadratic_descent(cfg: OptimizerConfig) -> Vec<f64> {
        // f(w) = ½‖w‖², ∇f = w
        let mut p = LayerParams::from_weight(
            DenseMatrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap(),
            Some(vec![3.0]),
        );
        let mut opt = Optimizer::new(cfg);
        let mut losses = Vec::new();
        for _ in 0..50 {
            let sq = |xs: &[f64]| xs.iter().map(|v| v * v).sum::<f64>();
            losses.push(0.5 * (sq(p.weight.as_slice()) + sq(p.bias.as_deref().unwrap_or(&[]))));
            p.grad_weight = Some(p.weight.clone());
            p.grad_bias = p.bias.clone();
            opt.step(&mut [&mut p]);
        }
        losses
    }

    #[test]
    fn sgd_and_adam_descend_quadratic() {
        for cfg in [OptimizerConfig::sgd(0.05), OptimizerConfig::adam(0.01)] {
            let losses = quadratic_descent(cfg);
            assert!(losses.windows(2).all(|w| w[1] < w[0]), "{:?}", cfg.kind);
        }
    }

    #[test]
    fn single_step_moves_towards_origin() {
        for cfg in [OptimizerConfig::sgd(0.1), OptimizerConfig::adam(0.1)] {
            let mut p = LayerParams::from_weight(DenseMatrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap(), None);
            p.grad_weight = Some(p.weight.clone());
            let mut opt = Optimizer::new(cfg);
            opt.step(&mut [&mut p]);
            assert_eq!(opt.steps_taken(), 1);
            let w = p.weight.as_slice();
            assert!(w[0] < 1.0 && w[0] > 0.0 && w[1] > -1.0 && w[1] < 0.0);
            assert!(p.grad_weight.is_none());
        }
    }
}
