use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::rng::Rng;

/// Weight matrix, optional bias and gradient accumulators of equal shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
    #[serde(skip)]
    pub grad_weight: Option<DenseMatrix>,
    #[serde(skip)]
    pub grad_bias: Option<Vec<f64>>,
}

impl LayerParams {
    /// Uniform Glorot initialisation, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, bias: bool, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let weight = DenseMatrix::from_vec(fan_in, fan_out, data).expect("shape");
        Self::from_weight(weight, bias.then(|| vec![0.0; fan_out]))
    }

    pub fn from_weight(weight: DenseMatrix, bias: Option<Vec<f64>>) -> Self {
        Self {
            weight,
            bias,
            grad_weight: None,
            grad_bias: None,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight = None;
        self.grad_bias = None;
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub(crate) fn accumulate_weight_grad(&mut self, g: DenseMatrix) {
        match &mut self.grad_weight {
            Some(acc) => acc.add_assign(&g).expect("gradient shape"),
            None => self.grad_weight = Some(g),
        }
    }

    pub(crate) fn accumulate_bias_grad(&mut self, g: Vec<f64>) {
        if self.bias.is_none() {
            return;
        }
        match &mut self.grad_bias {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            None => self.grad_bias = Some(g),
        }
    }

    /// `(parameter, gradient)` pairs; absent gradients read as zero.
    pub fn slots(&mut self) -> Vec<(&mut [f64], Option<&[f64]>)> {
        let mut out: Vec<(&mut [f64], Option<&[f64]>)> = vec![(
            self.weight.as_mut_slice(),
            self.grad_weight.as_ref().map(DenseMatrix::as_slice),
        )];
        if let Some(b) = &mut self.bias {
            out.push((b.as_mut_slice(), self.grad_bias.as_deref()));
        }
        out
    }
}
