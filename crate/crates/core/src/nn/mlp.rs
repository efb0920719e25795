use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::params::LayerParams;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fully connected network: ReLU between layers, identity on the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<LayerParams>,
    #[serde(skip)]
    cache: Vec<(DenseMatrix, DenseMatrix)>,
}

impl Mlp {
    /// `sizes = [in, h1, .., out]`.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| LayerParams::glorot(w[0], w[1], true, rng))
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<LayerParams>) -> Self {
        Self {
            layers,
            cache: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, LayerParams::fan_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, LayerParams::fan_out)
    }

    /// Batch forward (one example per row); caches activations for `backward`.
    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "MLP expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        self.cache.clear();
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weight)?;
            if let Some(b) = &layer.bias {
                z.add_row_vector(b);
            }
            let out = if i < last {
                let mut a = z.clone();
                a.map_inplace(|v| v.max(0.0));
                a
            } else {
                z.clone()
            };
            self.cache.push((h, z));
            h = out;
        }
        Ok(h)
    }

    /// Forward without touching the cache.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.clone_without_cache().forward(x)
    }

    fn clone_without_cache(&self) -> Self {
        Self::from_layers(self.layers.clone())
    }

    /// Accumulates parameter gradients for `d loss / d output`; returns the
    /// input gradient.
    pub fn backward(&mut self, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cache.len() != self.layers.len() {
            return Err(Error::InvalidState("MLP backward called before forward".into()));
        }
        let last = self.layers.len() - 1;
        let mut grad = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let (input, z) = &self.cache[i];
            if i < last {
                for (g, &zv) in grad.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if zv <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let layer = &mut self.layers[i];
            layer.accumulate_bias_grad(grad.column_sums());
            layer.accumulate_weight_grad(input.t_matmul(&grad)?);
            grad = grad.matmul_t(&layer.weight)?;
        }
        Ok(grad)
    }

    pub fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        self.layers.iter_mut().collect()
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(LayerParams::zero_grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn shapes_and_determinism() {
        let a = Mlp::new(&[6, 8, 8, 2], &mut seeded(5));
        let b = Mlp::new(&[6, 8, 8, 2], &mut seeded(5));
        assert_eq!(a, b);
        let x = DenseMatrix::from_vec(3, 6, (0..18).map(|i| i as f64 * 0.1).collect()).unwrap();
        let y = a.predict(&x).unwrap();
        assert_eq!(y.shape(), (3, 2));
        assert!(a.predict(&DenseMatrix::zeros(1, 5)).is_err());
    }

    #[test]
    fn backward_requires_forward() {
        let mut a = Mlp::new(&[2, 2], &mut seeded(0));
        assert!(a.backward(&DenseMatrix::zeros(1, 2)).is_err());
    }
}
