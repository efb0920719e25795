//! Benchmark fixtures.

use graphsr::graph::{make_synthetic_graph, Graph, SyntheticSpec};
use graphsr::nn::DenseMatrix;
use graphsr::rl::{Action, Transition};

/// Stochastic block graph of roughly Cora size: 2702 nodes in 7 classes.
pub fn cora_sized_graph() -> Graph {
    let spec = SyntheticSpec::new(2702, 7, 0.009, 0.0003, 64, 0);
    make_synthetic_graph(&spec).unwrap().row_normalized()
}

/// Deterministic dense matrix with entries in [-1, 1).
pub fn dense(rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|i| ((i.wrapping_mul(2654435761) % 2000) as f64) / 1000.0 - 1.0)
        .collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// An episode-sized batch of transitions with alternating actions.
pub fn transitions(len: usize, state_dim: usize) -> Vec<Transition> {
    let states = dense(len, state_dim);
    (0..len)
        .map(|i| Transition {
            state: states.row(i).to_vec(),
            action: Action::from_index(i % 2),
            reward: if i % 3 == 0 { -1.0 } else { 1.0 },
            logprob: -std::f64::consts::LN_2,
            value: 0.0,
        })
        .collect()
}
