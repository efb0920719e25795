use rand::Rng as _;

use super::matrix::DenseMatrix;
use crate::rng::Rng;

/// Inverted dropout: kept units are scaled by `1 / (1 − rate)` so the
/// expectation is unchanged. The mask is kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Dropout {
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn forward(&mut self, x: &DenseMatrix, rate: f64, rng: &mut Rng, training: bool) -> DenseMatrix {
        if !training || rate <= 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..x.as_slice().len())
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect();
        let mut out = x.clone();
        for (v, m) in out.as_mut_slice().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&self, grad: &DenseMatrix) -> DenseMatrix {
        let mut out = grad.clone();
        if let Some(mask) = &self.mask {
            for (g, m) in out.as_mut_slice().iter_mut().zip(mask) {
                *g *= m;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn rate_zero_is_identity() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0, 3.5]]).unwrap();
        let mut d = Dropout::default();
        assert_eq!(d.forward(&x, 0.0, &mut seeded(0), true), x);
        assert_eq!(d.forward(&x, 0.5, &mut seeded(0), false), x);
        assert_eq!(d.backward(&x), x);
    }

    #[test]
    fn expectation_preserved_within_three_sigma() {
        let n = 20_000;
        let p = 0.5;
        let x = DenseMatrix::from_vec(1, n, vec![1.0; n]).unwrap();
        let out = Dropout::default().forward(&x, p, &mut seeded(17), true);
        let mean = out.as_slice().iter().sum::<f64>() / n as f64;
        // each output is 0 or 1/(1-p): variance p/(1-p)
        let sigma = (p / (1.0 - p) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn backward_uses_forward_mask() {
        let x = DenseMatrix::from_vec(1, 64, vec![1.0; 64]).unwrap();
        let mut d = Dropout::default();
        let out = d.forward(&x, 0.5, &mut seeded(1), true);
        assert_eq!(d.backward(&x), out);
    }
}
