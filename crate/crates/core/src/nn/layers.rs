//! Graph convolution layers with hand-derived backward passes.
//!
//! Both layers compute a pre-activation `Z` and return `σ(Z)`; the layer
//! input is not cached (the first layer's input is the feature matrix, which
//! can be large), so `backward` takes it again.

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::params::LayerParams;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &DenseMatrix) -> DenseMatrix {
        let mut out = z.clone();
        if self == Activation::Relu {
            out.map_inplace(|v| v.max(0.0));
        }
        out
    }

    /// Multiplies `grad` by σ'(z) in place.
    fn backprop(self, z: &DenseMatrix, grad: &mut DenseMatrix) {
        if self == Activation::Relu {
            for (g, &zv) in grad.as_mut_slice().iter_mut().zip(z.as_slice()) {
                if zv <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Dense or sparse layer input.
#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    Dense(&'a DenseMatrix),
    Sparse(&'a SparseMatrix),
}

impl LayerInput<'_> {
    pub fn rows(&self) -> usize {
        match self {
            LayerInput::Dense(m) => m.rows(),
            LayerInput::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LayerInput::Dense(m) => m.cols(),
            LayerInput::Sparse(m) => m.cols(),
        }
    }

    fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Dense(m) => m.matmul(w),
            LayerInput::Sparse(m) => m.matmul(w),
        }
    }

    fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Dense(m) => m.t_matmul(g),
            LayerInput::Sparse(m) => m.t_matmul(g),
        }
    }
}

impl<'a> From<&'a DenseMatrix> for LayerInput<'a> {
    fn from(m: &'a DenseMatrix) -> Self {
        LayerInput::Dense(m)
    }
}

fn check_input(input: &LayerInput<'_>, graph: &Graph, fan_in: usize) -> Result<()> {
    if input.rows() != graph.num_nodes() || input.cols() != fan_in {
        return Err(Error::Shape(format!(
            "layer expects {}x{fan_in} input, got {}x{}",
            graph.num_nodes(),
            input.rows(),
            input.cols()
        )));
    }
    Ok(())
}

/// `σ(Â · H · W + b)` with `Â = D̃^{-1/2}(A + I)D̃^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayer {
    pub params: LayerParams,
    pub activation: Activation,
    #[serde(skip)]
    pre_activation: Option<DenseMatrix>,
}

impl GcnLayer {
    pub fn new(params: LayerParams, activation: Activation) -> Self {
        Self {
            params,
            activation,
            pre_activation: None,
        }
    }

    pub fn forward(&mut self, input: LayerInput<'_>, graph: &Graph) -> Result<DenseMatrix> {
        let (out, z) = self.apply(input, graph)?;
        self.pre_activation = Some(z);
        Ok(out)
    }

    /// Forward pass without caching; returns `(σ(Z), Z)`.
    pub fn apply(&self, input: LayerInput<'_>, graph: &Graph) -> Result<(DenseMatrix, DenseMatrix)> {
        check_input(&input, graph, self.params.fan_in())?;
        let hw = input.matmul(&self.params.weight)?;
        let mut z = graph.gcn_adjacency().matmul(&hw)?;
        if let Some(b) = &self.params.bias {
            z.add_row_vector(b);
        }
        Ok((self.activation.apply(&z), z))
    }

    /// Accumulates parameter gradients; returns the input gradient when
    /// `need_input_grad` is set.
    pub fn backward(
        &mut self,
        input: LayerInput<'_>,
        graph: &Graph,
        grad_out: &DenseMatrix,
        need_input_grad: bool,
    ) -> Result<Option<DenseMatrix>> {
        let z = self
            .pre_activation
            .as_ref()
            .ok_or_else(|| Error::InvalidState("backward called before forward".into()))?;
        let mut dz = grad_out.clone();
        self.activation.backprop(z, &mut dz);
        self.params.accumulate_bias_grad(dz.column_sums());
        let d_hw = graph.gcn_adjacency().t_matmul(&dz)?;
        self.params.accumulate_weight_grad(input.t_matmul(&d_hw)?);
        if need_input_grad {
            Ok(Some(d_hw.matmul_t(&self.params.weight)?))
        } else {
            Ok(None)
        }
    }
}

/// `σ(W · [h_v ; mean_{u∈N(v)} h_u] + b)`, with `W` of shape `(2·in, out)`
/// and a zero neighbour mean for isolated nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageLayer {
    pub params: LayerParams,
    pub activation: Activation,
    #[serde(skip)]
    pre_activation: Option<DenseMatrix>,
}

impl SageLayer {
    pub fn new(params: LayerParams, activation: Activation) -> Result<Self> {
        if params.fan_in() % 2 != 0 {
            return Err(Error::Shape(format!(
                "SAGE weight needs an even number of rows, got {}",
                params.fan_in()
            )));
        }
        Ok(Self {
            params,
            activation,
            pre_activation: None,
        })
    }

    fn split_weight(&self) -> (DenseMatrix, DenseMatrix) {
        let w = &self.params.weight;
        let half = w.rows() / 2;
        (w.row_block(0, half), w.row_block(half, w.rows()))
    }

    pub fn forward(&mut self, input: LayerInput<'_>, graph: &Graph) -> Result<DenseMatrix> {
        let (out, z) = self.apply(input, graph)?;
        self.pre_activation = Some(z);
        Ok(out)
    }

    /// Forward pass without caching; returns `(σ(Z), Z)`.
    pub fn apply(&self, input: LayerInput<'_>, graph: &Graph) -> Result<(DenseMatrix, DenseMatrix)> {
        check_input(&input, graph, self.params.fan_in() / 2)?;
        let (w_self, w_nbr) = self.split_weight();
        // mean(H) · W_nbr == mean(H · W_nbr); the right side never densifies H.
        let mut z = input.matmul(&w_self)?;
        let nbr = graph.mean_adjacency().matmul(&input.matmul(&w_nbr)?)?;
        z.add_assign(&nbr)?;
        if let Some(b) = &self.params.bias {
            z.add_row_vector(b);
        }
        Ok((self.activation.apply(&z), z))
    }

    pub fn backward(
        &mut self,
        input: LayerInput<'_>,
        graph: &Graph,
        grad_out: &DenseMatrix,
        need_input_grad: bool,
    ) -> Result<Option<DenseMatrix>> {
        let z = self
            .pre_activation
            .as_ref()
            .ok_or_else(|| Error::InvalidState("backward called before forward".into()))?;
        let mut dz = grad_out.clone();
        self.activation.backprop(z, &mut dz);
        self.params.accumulate_bias_grad(dz.column_sums());
        let d_nbr = graph.mean_adjacency().t_matmul(&dz)?;
        let dw_self = input.t_matmul(&dz)?;
        let dw_nbr = input.t_matmul(&d_nbr)?;
        let half = dw_self.rows();
        let mut dw = DenseMatrix::zeros(2 * half, dz.cols());
        dw.set_row_block(0, &dw_self);
        dw.set_row_block(half, &dw_nbr);
        self.params.accumulate_weight_grad(dw);
        if need_input_grad {
            let (w_self, w_nbr) = self.split_weight();
            let mut dh = dz.matmul_t(&w_self)?;
            dh.add_assign(&d_nbr.matmul_t(&w_nbr)?)?;
            Ok(Some(dh))
        } else {
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3(features: DenseMatrix) -> Graph {
        Graph::new(features, vec![0, 0, 0], 1, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn edgeless_gcn_is_relu_of_hw() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.5]]).unwrap();
        let g = Graph::new(x.clone(), vec![0, 0], 1, []).unwrap();
        let w = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let mut layer = GcnLayer::new(LayerParams::from_weight(w.clone(), None), Activation::Relu);
        let out = layer.forward((&x).into(), &g).unwrap();
        let mut expect = x.matmul(&w).unwrap();
        expect.map_inplace(|v| v.max(0.0));
        assert_eq!(out, expect);
    }

    #[test]
    fn two_node_gcn_averages() {
        let x = DenseMatrix::identity(2);
        let g = Graph::new(x.clone(), vec![0, 0], 1, [(0, 1)]).unwrap();
        let mut layer = GcnLayer::new(
            LayerParams::from_weight(DenseMatrix::identity(2), None),
            Activation::Identity,
        );
        let out = layer.forward((&x).into(), &g).unwrap();
        for &v in out.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn sage_path_middle_node() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 8.0]]).unwrap();
        let g = path3(x.clone());
        let mut layer = SageLayer::new(
            LayerParams::from_weight(DenseMatrix::identity(4), None),
            Activation::Identity,
        )
        .unwrap();
        let out = layer.forward((&x).into(), &g).unwrap();
        assert_eq!(out.row(1), &[3.0, 4.0, 3.0, 5.0]);
        assert_eq!(out.row(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn sage_isolated_node_and_constant_neighbours() {
        let x = DenseMatrix::from_rows(&[vec![2.0], vec![7.0], vec![7.0], vec![-1.0]]).unwrap();
        let g = Graph::new(x.clone(), vec![0; 4], 1, [(0, 1), (0, 2)]).unwrap();
        let mut layer = SageLayer::new(
            LayerParams::from_weight(DenseMatrix::identity(2), None),
            Activation::Identity,
        )
        .unwrap();
        let out = layer.forward((&x).into(), &g).unwrap();
        assert_eq!(out.row(0), &[2.0, 7.0]);
        assert_eq!(out.row(3), &[-1.0, 0.0]);
    }

    #[test]
    fn backward_before_forward_fails() {
        let x = DenseMatrix::identity(3);
        let g = path3(x.clone());
        let mut layer = GcnLayer::new(
            LayerParams::from_weight(DenseMatrix::identity(3), None),
            Activation::Relu,
        );
        let err = layer.backward((&x).into(), &g, &DenseMatrix::zeros(3, 3), false);
        assert!(matches!(err, Err(Error::InvalidState(_))));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 8.0]]).unwrap();
        let g = path3(x.clone());
        let mut rng = crate::rng::seeded(3);
        let mut layer = SageLayer::new(LayerParams::glorot(4, 3, true, &mut rng), Activation::Relu).unwrap();
        layer.forward((&x).into(), &g).unwrap();
        let dh = layer
            .backward((&x).into(), &g, &DenseMatrix::zeros(3, 3), true)
            .unwrap()
            .unwrap();
        assert!(dh.as_slice().iter().all(|&v| v == 0.0));
        assert!(layer.params.grad_weight.unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(layer.params.grad_bias.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let x = DenseMatrix::identity(3);
        let g = path3(x);
        let mut layer = GcnLayer::new(
            LayerParams::from_weight(DenseMatrix::identity(2), None),
            Activation::Relu,
        );
        assert!(matches!(
            layer.forward((&DenseMatrix::identity(2)).into(), &g),
            Err(Error::Shape(_))
        ));
    }
}
