//! Reference imbalance remedies: loss re-weighting, training-set resampling
//! and pseudo-label supplements chosen at random or by similarity.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::LabelledNodes;
use crate::graph::Split;
use crate::nn::DenseMatrix;
use crate::rng::seeded;
use crate::selection::{compute_centers, rank_pool};

/// Effective-number smoothing used by [`BaselineKind::EnWeighting`].
pub const DEFAULT_EN_BETA: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Vanilla,
    ReWeighting,
    EnWeighting,
    OverSampling,
    CbSampling,
    RuSelection,
    SuSelection,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Vanilla,
        BaselineKind::ReWeighting,
        BaselineKind::EnWeighting,
        BaselineKind::OverSampling,
        BaselineKind::CbSampling,
        BaselineKind::RuSelection,
        BaselineKind::SuSelection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Vanilla => "vanilla",
            BaselineKind::ReWeighting => "re_weighting",
            BaselineKind::EnWeighting => "en_weighting",
            BaselineKind::OverSampling => "over_sampling",
            BaselineKind::CbSampling => "cb_sampling",
            BaselineKind::RuSelection => "ru_selection",
            BaselineKind::SuSelection => "su_selection",
        }
    }

    pub fn is_weighting(self) -> bool {
        matches!(self, BaselineKind::ReWeighting | BaselineKind::EnWeighting)
    }

    pub fn is_resampling(self) -> bool {
        matches!(self, BaselineKind::OverSampling | BaselineKind::CbSampling)
    }

    pub fn is_selection(self) -> bool {
        matches!(self, BaselineKind::RuSelection | BaselineKind::SuSelection)
    }
}

impl std::fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown baseline `{s}`")))
    }
}

/// Per-class loss weights, normalised to sum to the number of classes.
/// Re-weighting uses `1/n_i`; EN-weighting uses `(1-β)/(1-β^n_i)`.
pub fn class_weights(kind: BaselineKind, class_counts: &[usize], beta: f64) -> Result<Vec<f64>> {
    if let Some(c) = class_counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidArgument(format!("class {c} has no training nodes")));
    }
    let raw: Vec<f64> = match kind {
        BaselineKind::ReWeighting => class_counts.iter().map(|&n| 1.0 / n as f64).collect(),
        BaselineKind::EnWeighting => {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidArgument(format!("beta {beta} outside [0, 1)")));
            }
            class_counts
                .iter()
                .map(|&n| (1.0 - beta) / (1.0 - beta.powi(n as i32)))
                .collect()
        }
        other => {
            return Err(Error::InvalidArgument(format!("{other} does not weight the loss")));
        }
    };
    let total: f64 = raw.iter().sum();
    let m = class_counts.len() as f64;
    Ok(raw.iter().map(|w| w * m / total).collect())
}

/// Resampled training multiset.
///
/// Over-sampling tops every class up to the largest class count with uniform
/// draws (with replacement) from its own nodes. Class-balanced sampling makes
/// `|V_L|` draws, each picking a class uniformly and then one of its nodes.
pub fn resample(kind: BaselineKind, split: &Split, seed: u64) -> Result<LabelledNodes> {
    let mut rng = seeded(seed);
    let by_class: Vec<Vec<usize>> = (0..split.num_classes).map(|c| split.train_of_class(c)).collect();
    match kind {
        BaselineKind::OverSampling => {
            let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
            let mut out = LabelledNodes::new(split.train.clone(), split.train_labels.clone());
            for (class, nodes) in by_class.iter().enumerate() {
                if nodes.is_empty() {
                    continue;
                }
                for _ in nodes.len()..target {
                    out.push(*nodes.choose(&mut rng).expect("nonempty"), class);
                }
            }
            Ok(out)
        }
        BaselineKind::CbSampling => {
            let classes: Vec<usize> = (0..split.num_classes).filter(|&c| !by_class[c].is_empty()).collect();
            if classes.is_empty() {
                return Err(Error::InvalidSplit("no labelled training nodes".into()));
            }
            let mut out = LabelledNodes::default();
            for _ in 0..split.train.len() {
                let class = classes[rng.random_range(0..classes.len())];
                out.push(*by_class[class].choose(&mut rng).expect("nonempty"), class);
            }
            Ok(out)
        }
        other => Err(Error::InvalidArgument(format!("{other} is not a resampling method"))),
    }
}

/// Pseudo-labelled supplement that fills each minority class up to the
/// largest class count, or takes all of its pool when the pool is smaller.
/// The pool of class `i` is every unlabelled node predicted as `i`; random
/// selection draws from it uniformly, similarity selection takes the nodes
/// nearest the class centre. `pseudo_labels` is aligned with
/// `split.unlabelled`.
pub fn unlabeled_selection(
    kind: BaselineKind,
    split: &Split,
    embeddings: &DenseMatrix,
    pseudo_labels: &[usize],
    seed: u64,
) -> Result<LabelledNodes> {
    if !kind.is_selection() {
        return Err(Error::InvalidArgument(format!("{kind} does not select unlabelled nodes")));
    }
    if pseudo_labels.len() != split.unlabelled.len() {
        return Err(Error::Shape(format!(
            "{} pseudo-labels for {} unlabelled nodes",
            pseudo_labels.len(),
            split.unlabelled.len()
        )));
    }
    let counts = split.train_class_counts();
    let target = counts.iter().copied().max().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut out = LabelledNodes::default();
    let centers = if kind == BaselineKind::SuSelection {
        compute_centers(embeddings, split)?
    } else {
        Vec::new()
    };
    for (idx, &class) in split.minority_classes.iter().enumerate() {
        let gap = target.saturating_sub(counts[class]);
        let chosen: Vec<usize> = match kind {
            BaselineKind::RuSelection => {
                let mut pool: Vec<usize> = split
                    .unlabelled
                    .iter()
                    .zip(pseudo_labels)
                    .filter(|(_, &y)| y == class)
                    .map(|(&v, _)| v)
                    .collect();
                pool.shuffle(&mut rng);
                pool.truncate(gap);
                pool
            }
            _ => rank_pool(embeddings, &split.unlabelled, pseudo_labels, &centers[idx])
                .into_iter()
                .take(gap)
                .map(|c| c.node)
                .collect(),
        };
        for v in chosen {
            out.push(v, class);
        }
    }
    Ok(out)
}
