use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::rng::{derive_seed, seeded};

/// Planted-partition (stochastic block model) graph with
/// class-indicator-plus-Gaussian-noise features. Block `c` holds nodes
/// `c·n/m .. (c+1)·n/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub intra_p: f64,
    pub inter_p: f64,
    pub feature_dim: usize,
    #[serde(default = "default_noise")]
    pub feature_noise: f64,
    pub seed: u64,
}

fn default_noise() -> f64 {
    0.5
}

impl SyntheticSpec {
    pub fn new(num_nodes: usize, num_classes: usize, intra_p: f64, inter_p: f64, feature_dim: usize, seed: u64) -> Self {
        Self {
            num_nodes,
            num_classes,
            intra_p,
            inter_p,
            feature_dim,
            feature_noise: default_noise(),
            seed,
        }
    }
}

pub fn make_synthetic_graph(spec: &SyntheticSpec) -> Result<Graph> {
    let SyntheticSpec {
        num_nodes: n,
        num_classes: m,
        intra_p,
        inter_p,
        feature_dim: d,
        feature_noise,
        seed,
    } = *spec;
    for (name, p) in [("intra_p", intra_p), ("inter_p", inter_p)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("{name}={p} is not a probability")));
        }
    }
    if m == 0 || n % m != 0 {
        return Err(Error::InvalidArgument(format!(
            "{n} nodes cannot be split into {m} equal blocks"
        )));
    }
    if d == 0 || !(feature_noise >= 0.0 && feature_noise.is_finite()) {
        return Err(Error::InvalidArgument("feature_dim must be positive and noise finite".into()));
    }
    let block = n / m;
    let labels: Vec<usize> = (0..n).map(|v| v / block).collect();

    let mut edge_rng = seeded(derive_seed(seed, "sbm-edges"));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { intra_p } else { inter_p };
            if p >= 1.0 || (p > 0.0 && edge_rng.random::<f64>() < p) {
                edges.push((u, v));
            }
        }
    }

    let mut feat_rng = seeded(derive_seed(seed, "sbm-features"));
    let noise = Normal::new(0.0, feature_noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut features = DenseMatrix::zeros(n, d);
    for v in 0..n {
        let row = features.row_mut(v);
        for x in row.iter_mut() {
            *x = noise.sample(&mut feat_rng);
        }
        row[labels[v] % d] += 1.0;
    }
    Graph::new(features, labels, m, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_sbm_is_two_cliques() {
        let g = make_synthetic_graph(&SyntheticSpec::new(10, 2, 1.0, 0.0, 4, 1)).unwrap();
        for v in 0..10 {
            assert_eq!(g.degree(v), 4);
            assert!(g.neighbors(v).iter().all(|&u| g.label(u) == g.label(v)));
        }
        assert_eq!(g.num_edges(), 2 * 10);
    }

    #[test]
    fn edge_count_within_three_sigma() {
        let (n, p) = (200usize, 0.05);
        let g = make_synthetic_graph(&SyntheticSpec::new(n, 4, p, p, 4, 9)).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = p * pairs;
        let sigma = (pairs * p * (1.0 - p)).sqrt();
        assert!((g.num_edges() as f64 - mean).abs() < 3.0 * sigma);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticSpec::new(60, 3, 0.3, 0.02, 5, 77);
        let a = make_synthetic_graph(&spec).unwrap();
        let b = make_synthetic_graph(&spec).unwrap();
        assert_eq!(a, b);
        let bits = |g: &Graph| g.features().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn invalid_probability() {
        assert!(make_synthetic_graph(&SyntheticSpec::new(10, 2, 1.5, 0.0, 2, 0)).is_err());
        assert!(make_synthetic_graph(&SyntheticSpec::new(11, 2, 0.5, 0.0, 2, 0)).is_err());
    }
}
