use crate::error::{Error, Result};
use crate::nn::matrix::{axpy, DenseMatrix};

/// Weighted CSR matrix used for propagation operators (`Â`, mean aggregation)
/// and for sparse feature matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from CSR arrays. Column indices inside a row need not be sorted.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || col_idx.len() != values.len() {
            return Err(Error::Shape("inconsistent CSR arrays".into()));
        }
        if row_ptr.last() != Some(&col_idx.len()) || col_idx.iter().any(|&c| c >= cols) {
            return Err(Error::Shape("CSR column index out of range".into()));
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Drops the zero entries of a dense matrix.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.set(i, j, out.get(i, j) + v);
            }
        }
        out
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows() {
            return Err(Error::Shape(format!(
                "sparse {}x{} by {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols());
        for i in 0..self.rows {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let o_row = out.row_mut(i);
            for (&j, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                axpy(v, rhs.row(j), o_row);
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows() {
            return Err(Error::Shape(format!(
                "sparse {}x{} (transposed) by {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols());
        for i in 0..self.rows {
            let r_row = rhs.row(i);
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            for (&j, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                axpy(v, r_row, out.row_mut(j));
            }
        }
        Ok(out)
    }
}
