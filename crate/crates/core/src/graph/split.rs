use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Parameters of the imitative imbalanced split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub minority_classes: BTreeSet<usize>,
    pub majority_count: usize,
    pub imbalance_ratio: f64,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(minority_classes: impl IntoIterator<Item = usize>, imbalance_ratio: f64, seed: u64) -> Self {
        Self {
            minority_classes: minority_classes.into_iter().collect(),
            majority_count: 20,
            imbalance_ratio,
            val_per_class: 30,
            test_per_class: 100,
            seed,
        }
    }

    pub fn minority_count(&self) -> Result<usize> {
        minority_train_count(self.majority_count, self.imbalance_ratio)
    }

    pub fn train_count(&self, class: usize) -> Result<usize> {
        if self.minority_classes.contains(&class) {
            self.minority_count()
        } else {
            Ok(self.majority_count)
        }
    }
}

/// `round_half_up(majority_count · ρ)`, required to be at least one.
pub fn minority_train_count(majority_count: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidSplit(format!(
            "imbalance ratio {ratio} outside (0, 1]"
        )));
    }
    // The small epsilon keeps products like 20 * 0.15 = 2.9999999999999996
    // on the intended side of the half-way point.
    let count = (majority_count as f64 * ratio + 0.5 + 1e-9).floor() as usize;
    if count == 0 {
        return Err(Error::InvalidSplit(format!(
            "ratio {ratio} leaves no minority training nodes out of {majority_count}"
        )));
    }
    Ok(count)
}

/// Train / validation / test / unlabelled partition of the node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub num_classes: usize,
    pub minority_classes: BTreeSet<usize>,
    /// Labelled training nodes (`V_L`), grouped by class.
    pub train: Vec<usize>,
    pub train_labels: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Everything else (`U`), ascending.
    pub unlabelled: Vec<usize>,
}

impl Split {
    pub fn is_minority(&self, class: usize) -> bool {
        self.minority_classes.contains(&class)
    }

    pub fn train_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.train_labels {
            counts[y] += 1;
        }
        counts
    }

    /// Training nodes of `class`.
    pub fn train_of_class(&self, class: usize) -> Vec<usize> {
        self.train
            .iter()
            .zip(&self.train_labels)
            .filter(|(_, &y)| y == class)
            .map(|(&v, _)| v)
            .collect()
    }
}

/// Samples the imbalanced split. Each class is shuffled independently (in
/// ascending class order, from one seeded stream) and then cut into train,
/// val and test prefixes; remaining nodes form `U`.
pub fn make_imbalanced_split(graph: &Graph, spec: &SplitSpec) -> Result<Split> {
    let minority = spec.minority_count()?;
    let m = graph.num_classes();
    if let Some(&c) = spec.minority_classes.iter().find(|&&c| c >= m) {
        return Err(Error::InvalidSplit(format!(
            "minority class {c} does not exist ({m} classes)"
        )));
    }
    let needed = spec.majority_count + spec.val_per_class + spec.test_per_class;
    let by_class = graph.nodes_by_class();
    if let Some((c, nodes)) = by_class.iter().enumerate().find(|(_, n)| n.len() < needed) {
        return Err(Error::InvalidSplit(format!(
            "class {c} has {} nodes, needs at least {needed}",
            nodes.len()
        )));
    }

    let mut rng = seeded(spec.seed);
    let mut split = Split {
        num_classes: m,
        minority_classes: spec.minority_classes.clone(),
        train: Vec::new(),
        train_labels: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        unlabelled: Vec::new(),
    };
    for (c, nodes) in by_class.into_iter().enumerate() {
        let mut nodes = nodes;
        nodes.shuffle(&mut rng);
        let n_train = if spec.minority_classes.contains(&c) {
            minority
        } else {
            spec.majority_count
        };
        let (train, rest) = nodes.split_at(n_train);
        let (val, rest) = rest.split_at(spec.val_per_class);
        let (test, rest) = rest.split_at(spec.test_per_class);
        split.train.extend_from_slice(train);
        split.train_labels.extend(std::iter::repeat_n(c, train.len()));
        split.val.extend_from_slice(val);
        split.test.extend_from_slice(test);
        split.unlabelled.extend_from_slice(rest);
    }
    split.unlabelled.sort_unstable();
    Ok(split)
}

/// Draws `count` distinct minority classes out of `num_classes` from `seed`.
pub fn draw_minority_classes(num_classes: usize, count: usize, seed: u64) -> Result<BTreeSet<usize>> {
    if count > num_classes {
        return Err(Error::InvalidSplit(format!(
            "cannot pick {count} minority classes out of {num_classes}"
        )));
    }
    let mut classes: Vec<usize> = (0..num_classes).collect();
    classes.shuffle(&mut seeded(seed));
    Ok(classes.into_iter().take(count).collect())
}
