//! Classification metrics over a labelled node set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::model::argmax;
use crate::nn::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub macro_f1: f64,
    pub auc_roc: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl EvalReport {
    /// Builds a report from per-example class scores (one row per example).
    pub fn from_scores(scores: &DenseMatrix, labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("evaluation over an empty node set".into()));
        }
        if scores.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} score rows for {} labels",
                scores.rows(),
                labels.len()
            )));
        }
        let m = scores.cols();
        if let Some(&y) = labels.iter().find(|&&y| y >= m) {
            return Err(Error::InvalidArgument(format!("label {y} out of range for {m} classes")));
        }
        let predicted: Vec<usize> = (0..scores.rows()).map(|i| argmax(scores.row(i))).collect();
        let confusion = confusion_matrix(&predicted, labels, m);
        let (precision, recall) = precision_recall(&confusion);
        Ok(Self {
            acc: accuracy(&predicted, labels),
            macro_f1: macro_f1_from_confusion(&confusion),
            auc_roc: macro_auc(scores, labels),
            precision,
            recall,
        })
    }
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    let correct = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    correct as f64 / labels.len() as f64
}

/// `confusion[true][predicted]`.
pub fn confusion_matrix(predicted: &[usize], labels: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0; num_classes]; num_classes];
    for (&p, &y) in predicted.iter().zip(labels) {
        c[y][p] += 1;
    }
    c
}

/// Per-class precision and recall; a class that is never predicted (or never
/// present) gets 0.
pub fn precision_recall(confusion: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let m = confusion.len();
    let mut precision = vec![0.0; m];
    let mut recall = vec![0.0; m];
    for c in 0..m {
        let tp = confusion[c][c];
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let actual: usize = confusion[c].iter().sum();
        if predicted > 0 {
            precision[c] = tp as f64 / predicted as f64;
        }
        if actual > 0 {
            recall[c] = tp as f64 / actual as f64;
        }
    }
    (precision, recall)
}

/// Unweighted mean of per-class F1 = 2tp / (2tp + fp + fn), with F1 = 0
/// whenever tp = 0.
pub fn macro_f1_from_confusion(confusion: &[Vec<usize>]) -> f64 {
    let m = confusion.len();
    let mut total = 0.0;
    for c in 0..m {
        let tp = confusion[c][c];
        if tp == 0 {
            continue;
        }
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let actual: usize = confusion[c].iter().sum();
        total += 2.0 * tp as f64 / (predicted + actual) as f64;
    }
    total / m as f64
}

pub fn macro_f1(predicted: &[usize], labels: &[usize], num_classes: usize) -> f64 {
    macro_f1_from_confusion(&confusion_matrix(predicted, labels, num_classes))
}

/// One-vs-rest ROC AUC for the class whose membership is `positive`, from
/// the Mann-Whitney rank sum with tied scores sharing their average rank.
/// `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share (i+1+j)/2.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| positive[k]).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Macro one-vs-rest AUC over the classes that have both positive and
/// negative examples; 0.5 if no class qualifies.
pub fn macro_auc(scores: &DenseMatrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut column = vec![0.0; labels.len()];
    let mut positive = vec![false; labels.len()];
    for c in 0..scores.cols() {
        for (i, &y) in labels.iter().enumerate() {
            column[i] = scores.get(i, c);
            positive[i] = y == c;
        }
        if let Some(a) = binary_auc(&column, &positive) {
            total += a;
            counted += 1;
        }
    }
    if counted == 0 {
        0.5
    } else {
        total / counted as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let scores = DenseMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.7, 0.3]]).unwrap();
        let r = EvalReport::from_scores(&scores, &[0, 1, 0]).unwrap();
        assert_eq!((r.acc, r.macro_f1, r.auc_roc), (1.0, 1.0, 1.0));
        assert_eq!(r.precision, vec![1.0, 1.0]);
    }

    #[test]
    fn reversed_scores_auc_zero() {
        assert_eq!(binary_auc(&[0.9, 0.8, 0.1, 0.2], &[false, false, true, true]), Some(0.0));
    }

    #[test]
    fn all_tied_scores_half() {
        assert_eq!(binary_auc(&[0.5; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(binary_auc(&[0.5; 2], &[true, true]), None);
    }

    #[test]
    fn six_example_three_class_f1() {
        // confusion (true x pred): [[1,1,0],[0,2,0],[1,0,1]]
        let pred = [0, 1, 1, 1, 0, 2];
        let truth = [0, 0, 1, 1, 2, 2];
        // per class F1: 2/(2+2)=0.5, 4/(3+2)=0.8, 2/(1+2)=2/3
        let expected = (0.5 + 0.8 + 2.0 / 3.0) / 3.0;
        assert!((macro_f1(&pred, &truth, 3) - expected).abs() < 1e-15);
        let (p, r) = precision_recall(&confusion_matrix(&pred, &truth, 3));
        assert_eq!(p, vec![0.5, 2.0 / 3.0, 1.0]);
        assert_eq!(r, vec![0.5, 1.0, 0.5]);
    }

    #[test]
    fn absent_class_zero_precision() {
        let (p, _) = precision_recall(&confusion_matrix(&[0, 0], &[0, 1], 2));
        assert_eq!(p[1], 0.0);
        assert_eq!(macro_f1(&[0, 0], &[0, 1], 2), (2.0 / 3.0) / 2.0);
    }

    #[test]
    fn empty_set_is_error() {
        assert!(EvalReport::from_scores(&DenseMatrix::zeros(0, 2), &[]).is_err());
    }
}
