//! Similarity-based candidate construction: class centres from labelled
//! embeddings and, per minority class, the unlabelled nodes predicted as that
//! class that lie closest to its centre.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Split;
use crate::nn::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCenter {
    pub class_id: usize,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: usize,
    /// Pseudo-label, always the minority class this entry was selected for.
    pub class: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Class-ascending, then distance-ascending (ties to the lower node id).
    pub entries: Vec<Candidate>,
    pub k: usize,
    /// `(class, largest retained distance)`; classes with no candidates are
    /// absent.
    pub phi: Vec<(usize, f64)>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.entries.iter().map(|c| c.node).collect()
    }

    pub fn of_class(&self, class: usize) -> impl Iterator<Item = &Candidate> {
        self.entries.iter().filter(move |c| c.class == class)
    }

    /// Candidate counts indexed by class id.
    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for c in &self.entries {
            counts[c.class] += 1;
        }
        counts
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "node_id,class,distance")?;
        for c in &self.entries {
            writeln!(out, "{},{},{}", c.node, c.class, c.distance)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_csv(&mut file)
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Mean embedding of the labelled training nodes of each minority class.
pub fn compute_centers(embeddings: &DenseMatrix, split: &Split) -> Result<Vec<ClassCenter>> {
    split
        .minority_classes
        .iter()
        .map(|&class| {
            let members = split.train_of_class(class);
            if members.is_empty() {
                return Err(Error::InvalidSplit(format!("minority class {class} has no labelled nodes")));
            }
            let mut center = vec![0.0; embeddings.cols()];
            for &v in &members {
                for (c, &z) in center.iter_mut().zip(embeddings.row(v)) {
                    *c += z;
                }
            }
            let n = members.len() as f64;
            center.iter_mut().for_each(|c| *c /= n);
            Ok(ClassCenter { class_id: class, center })
        })
        .collect()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Every node of `unlabelled` whose pseudo-label is `center.class_id`,
/// ordered by distance to the centre (ties to the lower node id).
pub fn rank_pool(
    embeddings: &DenseMatrix,
    unlabelled: &[usize],
    pseudo_labels: &[usize],
    center: &ClassCenter,
) -> Vec<Candidate> {
    let mut pool: Vec<Candidate> = unlabelled
        .iter()
        .zip(pseudo_labels)
        .filter(|(_, &y)| y == center.class_id)
        .map(|(&node, _)| Candidate {
            node,
            class: center.class_id,
            distance: euclidean(embeddings.row(node), &center.center),
        })
        .collect();
    pool.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.node.cmp(&b.node)));
    pool
}

/// Top-`k` nearest pseudo-labelled nodes per minority class.
/// `pseudo_labels[i]` is the predicted class of `unlabelled[i]`.
pub fn build_candidates(
    embeddings: &DenseMatrix,
    unlabelled: &[usize],
    pseudo_labels: &[usize],
    centers: &[ClassCenter],
    k: usize,
) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("candidate count K must be at least 1".into()));
    }
    if unlabelled.len() != pseudo_labels.len() {
        return Err(Error::Shape(format!(
            "{} unlabelled nodes but {} pseudo-labels",
            unlabelled.len(),
            pseudo_labels.len()
        )));
    }
    let mut centers: Vec<&ClassCenter> = centers.iter().collect();
    centers.sort_by_key(|c| c.class_id);
    let mut entries = Vec::new();
    let mut phi = Vec::new();
    for center in centers {
        let mut pool = rank_pool(embeddings, unlabelled, pseudo_labels, center);
        pool.truncate(k);
        if let Some(last) = pool.last() {
            phi.push((center.class_id, last.distance));
        }
        entries.extend(pool);
    }
    Ok(CandidateSet { entries, k, phi })
}
