//! Binary decision tree with Gini-impurity splits.
//!
//! Thresholds are searched exhaustively at midpoints of consecutive distinct
//! sorted feature values. Ties in the weighted impurity are broken by lower
//! feature index, then lower threshold, so growth is fully deterministic.
//! Leaves store the positive-class fraction of their training rows.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

use super::ClassifierError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum number of rows a node needs to be considered for splitting.
    pub min_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_split: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        pos_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Leaf positive fraction reached by `row` (left on `value <= threshold`).
    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        match self {
            TreeNode::Leaf { pos_fraction } => *pos_fraction,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.score(row)
                } else {
                    right.score(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// How split candidates are chosen at each node.
pub(crate) enum FeatureSampler {
    /// Examine every feature, ascending.
    All,
    /// Examine features in a seeded random order until `max_features`
    /// non-constant candidates have been evaluated (constant features do not
    /// count, matching the usual forest splitter behavior).
    Random {
        rng: Box<ChaCha8Rng>,
        max_features: usize,
    },
}

pub(crate) struct TreeBuilder<'a> {
    pub x: &'a Array2<f64>,
    pub is_pos: &'a [bool],
    pub max_depth: usize,
    pub min_split: usize,
}

struct Candidate {
    weighted_gini: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.weighted_gini, self.feature, self.threshold)
            < (other.weighted_gini, other.feature, other.threshold)
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

impl TreeBuilder<'_> {
    pub(crate) fn grow(
        &self,
        indices: &[usize],
        depth: usize,
        sampler: &mut FeatureSampler,
    ) -> TreeNode {
        let n = indices.len();
        let pos = indices.iter().filter(|&&i| self.is_pos[i]).count();
        let leaf = TreeNode::Leaf {
            pos_fraction: pos as f64 / n as f64,
        };
        if pos == 0 || pos == n || depth >= self.max_depth || n < self.min_split.max(2) {
            return leaf;
        }

        let best = match sampler {
            FeatureSampler::All => {
                let mut best: Option<Candidate> = None;
                for feature in 0..self.x.ncols() {
                    self.consider(indices, feature, &mut best);
                }
                best
            }
            FeatureSampler::Random { rng, max_features } => {
                let mut order: Vec<usize> = (0..self.x.ncols()).collect();
                order.shuffle(&mut **rng);
                let budget = (*max_features).max(1);
                let mut examined = 0;
                let mut best: Option<Candidate> = None;
                for feature in order {
                    if self.consider(indices, feature, &mut best) {
                        examined += 1;
                        if examined >= budget {
                            break;
                        }
                    }
                }
                best
            }
        };

        let Some(split) = best else {
            return leaf;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(&left_idx, depth + 1, sampler)),
            right: Box::new(self.grow(&right_idx, depth + 1, sampler)),
        }
    }

    /// Evaluates one feature's best threshold into `best`; returns whether
    /// the feature was non-constant (i.e. produced any candidate).
    fn consider(&self, indices: &[usize], feature: usize, best: &mut Option<Candidate>) -> bool {
        let n = indices.len();
        let mut vals: Vec<(f64, bool)> = indices
            .iter()
            .map(|&i| (self.x[[i, feature]], self.is_pos[i]))
            .collect();
        vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if vals[0].0 == vals[n - 1].0 {
            return false;
        }

        let total_pos = vals.iter().filter(|(_, p)| *p).count();
        let mut pos_left = 0usize;
        let mut found = false;
        for i in 1..n {
            pos_left += usize::from(vals[i - 1].1);
            if vals[i].0 > vals[i - 1].0 {
                let threshold = 0.5 * (vals[i - 1].0 + vals[i].0);
                let (n_l, n_r) = (i, n - i);
                let weighted_gini = (n_l as f64 * gini(pos_left, n_l)
                    + n_r as f64 * gini(total_pos - pos_left, n_r))
                    / n as f64;
                let candidate = Candidate {
                    weighted_gini,
                    feature,
                    threshold,
                };
                if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                    *best = Some(candidate);
                }
                found = true;
            }
        }
        found
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
}

impl TreeModel {
    pub(crate) fn fit(params: &TreeParams, train: &Dataset) -> Result<Self, ClassifierError> {
        if params.max_depth == 0 {
            return Err(ClassifierError::InvalidParameter(
                "max_depth must be >= 1".into(),
            ));
        }
        let is_pos: Vec<bool> = train.labels().iter().map(|l| l.is_positive()).collect();
        let builder = TreeBuilder {
            x: train.samples(),
            is_pos: &is_pos,
            max_depth: params.max_depth,
            min_split: params.min_split,
        };
        let indices: Vec<usize> = (0..train.len()).collect();
        let root = builder.grow(&indices, 0, &mut FeatureSampler::All);
        Ok(Self { root })
    }

    pub(crate) fn scores(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let rows: Vec<_> = x.rows().into_iter().collect();
        rows.par_iter().map(|row| self.root.score(*row)).collect()
    }
}
