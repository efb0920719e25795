//! Attributed, labelled, undirected graphs plus dataset IO and the
//! imbalanced train/val/test splits.

mod io;
mod split;
mod synthetic;

use std::sync::OnceLock;

pub use io::{load_dataset, save_canonical, DatasetFormat, LoadOptions};
pub use split::{draw_minority_classes, make_imbalanced_split, minority_train_count, Split, SplitSpec};
pub use synthetic::{make_synthetic_graph, SyntheticSpec};

use crate::error::{Error, Result};
use crate::nn::{DenseMatrix, SparseMatrix};

/// Immutable undirected graph with dense node features and integer labels.
///
/// Adjacency is stored in CSR form, symmetric, deduplicated and without
/// self-loops. Propagation operators are derived lazily and cached.
#[derive(Debug, Clone)]
pub struct Graph {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
    class_names: Vec<String>,
    features_normalized: bool,
    gcn_adj: OnceLock<SparseMatrix>,
    mean_adj: OnceLock<SparseMatrix>,
    sparse_features: OnceLock<SparseMatrix>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
            && self.features == other.features
            && self.labels == other.labels
            && self.num_classes == other.num_classes
            && self.class_names == other.class_names
            && self.features_normalized == other.features_normalized
    }
}

impl Graph {
    /// Builds a graph from an edge list. Edges are symmetrised and
    /// deduplicated; self-loops are dropped.
    pub fn new(
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some((v, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "node {v} has label {y}, expected < {num_classes}"
            )));
        }
        if let Some(i) = (0..n).find(|&i| features.row(i).iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidGraph(format!("feature row {i} is not finite")));
        }
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
            col_idx.extend_from_slice(nbrs);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            row_ptr,
            col_idx,
            features,
            labels,
            num_classes,
            class_names: (0..num_classes).map(|c| c.to_string()).collect(),
            features_normalized: false,
            gcn_adj: OnceLock::new(),
            mean_adj: OnceLock::new(),
            sparse_features: OnceLock::new(),
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::InvalidGraph(format!(
                "{} class names for {} classes",
                names.len(),
                self.num_classes
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    /// Divides every nonzero feature row by its L1 norm.
    pub fn row_normalized(mut self) -> Self {
        if self.features_normalized {
            return self;
        }
        let cols = self.features.cols();
        for row in self.features.as_mut_slice().chunks_exact_mut(cols.max(1)) {
            let norm: f64 = row.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        self.features_normalized = true;
        self.sparse_features = OnceLock::new();
        self
    }

    pub(crate) fn mark_normalized(mut self, normalized: bool) -> Self {
        self.features_normalized = normalized;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn features_normalized(&self) -> bool {
        self.features_normalized
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|v| self.degree(v)).collect()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.num_classes];
        for &y in &self.labels {
            hist[y] += 1;
        }
        hist
    }

    /// Nodes of each class in ascending id order.
    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (v, &y) in self.labels.iter().enumerate() {
            out[y].push(v);
        }
        out
    }

    /// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
    pub fn gcn_adjacency(&self) -> &SparseMatrix {
        self.gcn_adj.get_or_init(|| {
            let n = self.num_nodes();
            let inv_sqrt: Vec<f64> = (0..n)
                .map(|v| 1.0 / ((self.degree(v) + 1) as f64).sqrt())
                .collect();
            let mut row_ptr = Vec::with_capacity(n + 1);
            let mut cols = Vec::with_capacity(self.col_idx.len() + n);
            let mut vals = Vec::with_capacity(self.col_idx.len() + n);
            row_ptr.push(0);
            for u in 0..n {
                let mut self_done = false;
                for &v in self.neighbors(u) {
                    if !self_done && v > u {
                        cols.push(u);
                        vals.push(inv_sqrt[u] * inv_sqrt[u]);
                        self_done = true;
                    }
                    cols.push(v);
                    vals.push(inv_sqrt[u] * inv_sqrt[v]);
                }
                if !self_done {
                    cols.push(u);
                    vals.push(inv_sqrt[u] * inv_sqrt[u]);
                }
                row_ptr.push(cols.len());
            }
            SparseMatrix::from_csr(n, n, row_ptr, cols, vals).expect("valid CSR")
        })
    }

    /// Row-stochastic neighbour mean; isolated nodes get an all-zero row.
    pub fn mean_adjacency(&self) -> &SparseMatrix {
        self.mean_adj.get_or_init(|| {
            let n = self.num_nodes();
            let vals = (0..n)
                .flat_map(|u| {
                    let w = 1.0 / self.degree(u).max(1) as f64;
                    std::iter::repeat_n(w, self.degree(u))
                })
                .collect();
            SparseMatrix::from_csr(n, n, self.row_ptr.clone(), self.col_idx.clone(), vals)
                .expect("valid CSR")
        })
    }

    /// The feature matrix with zero entries dropped.
    pub fn sparse_features(&self) -> &SparseMatrix {
        self.sparse_features
            .get_or_init(|| SparseMatrix::from_dense(&self.features))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        let x = DenseMatrix::identity(3);
        Graph::new(x, vec![0, 1, 0], 2, [(0, 1), (1, 2), (2, 1), (1, 1)]).unwrap()
    }

    #[test]
    fn path_graph_degrees() {
        let g = path3();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = path3();
        for u in 0..3 {
            for &v in g.neighbors(u) {
                assert!(g.neighbors(v).contains(&u));
            }
        }
        let a = g.gcn_adjacency().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn two_node_normalization() {
        let g = Graph::new(DenseMatrix::identity(2), vec![0, 1], 2, [(0, 1)]).unwrap();
        let a = g.gcn_adjacency().to_dense();
        for &v in a.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DenseMatrix::zeros(2, 1);
        assert!(Graph::new(x.clone(), vec![0, 2], 2, []).is_err());
        assert!(Graph::new(x.clone(), vec![0], 2, []).is_err());
        assert!(Graph::new(x, vec![0, 1], 2, [(0, 5)]).is_err());
        let nan = DenseMatrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(Graph::new(nan, vec![0], 1, []).is_err());
    }

    #[test]
    fn row_normalization() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let g = Graph::new(x, vec![0, 0], 1, []).unwrap().row_normalized();
        assert_eq!(g.features().row(0), &[0.25, 0.75]);
        assert_eq!(g.features().row(1), &[0.0, 0.0]);
    }

    #[test]
    fn isolated_node_has_zero_mean_row() {
        let g = Graph::new(DenseMatrix::identity(3), vec![0; 3], 1, [(0, 1)]).unwrap();
        let m = g.mean_adjacency().to_dense();
        assert_eq!(m.row(2), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(0), &[0.0, 1.0, 0.0]);
    }
}
