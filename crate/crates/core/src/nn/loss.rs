use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Row-wise softmax with max-shift.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_inplace(out.row_mut(i));
    }
    out
}

pub fn softmax_inplace(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Loss value and gradient with respect to the logits.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: DenseMatrix,
}

/// `mean_i w[y_i] · (−log softmax(logits_i)[y_i])` over the rows of `logits`.
pub fn cross_entropy_weighted(logits: &DenseMatrix, labels: &[usize], class_weights: &[f64]) -> Result<LossOutput> {
    let (n, m) = logits.shape();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if class_weights.len() != m {
        return Err(Error::Shape(format!(
            "{} class weights for {m} classes",
            class_weights.len()
        )));
    }
    if class_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("class weights must be finite and nonnegative".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cross-entropy over zero examples".into()));
    }
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        if y >= m {
            return Err(Error::InvalidArgument(format!("label {y} out of range for {m} classes")));
        }
        let w = class_weights[y];
        let logp = log_softmax(logits.row(i));
        loss += w * -logp[y];
        let row = grad.row_mut(i);
        row[y] -= 1.0;
        for g in row.iter_mut() {
            *g *= w * inv_n;
        }
    }
    Ok(LossOutput {
        loss: loss * inv_n,
        grad,
    })
}
