//! AdaBoost over depth-1 decision stumps.
//!
//! Each round fits the stump minimizing the weighted misclassification error
//! (both polarities considered, so the chosen error never exceeds 0.5),
//! weighs it by `alpha = ln((1 - err) / err) / 2`, and reweights the samples
//! multiplicatively. Boosting stops early only when a stump separates the
//! weighted data exactly. The model score is the weighted stump vote sum,
//! thresholded at zero.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

use super::ClassifierError;

/// Weighted errors at or below this are treated as an exact separation.
const EXACT_FIT_EPS: f64 = 1e-12;

/// Clamp applied to stage errors before the weight formula.
const ERROR_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self { n_estimators: 50 }
    }
}

/// Axis-aligned threshold classifier: rows with `value <= threshold` get the
/// left vote, the rest the opposite one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Vote (+1/-1) for the `<= threshold` side.
    pub left_vote: f64,
}

impl Stump {
    pub fn vote(&self, row: ArrayView1<f64>) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left_vote
        } else {
            -self.left_vote
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaBoostModel {
    /// `(stump, stage weight)` pairs in boosting order.
    pub stages: Vec<(Stump, f64)>,
}

/// Stage weight `alpha = ln((1 - error) / error) / 2`.
///
/// `error` must lie strictly inside (0, 1); callers clamp exact fits to
/// `[1e-10, 1 - 1e-10]` first.
pub fn stage_weight(error: f64) -> Result<f64, ClassifierError> {
    if !(error > 0.0 && error < 1.0) {
        return Err(ClassifierError::DegenerateError(error));
    }
    Ok(0.5 * ((1.0 - error) / error).ln())
}

/// Minimum weighted error stump over all features/thresholds/polarities.
/// Ties break toward lower feature index, then lower threshold, then the
/// left-positive polarity. Returns `None` when every feature is constant.
fn best_stump(x: &Array2<f64>, y: &[f64], weights: &[f64]) -> Option<(Stump, f64)> {
    let n = y.len();
    let mut best: Option<(f64, Stump)> = None;
    for feature in 0..x.ncols() {
        let mut order: Vec<usize> = (0..n).collect();
        order
            .sort_unstable_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
        if x[[order[0], feature]] == x[[order[n - 1], feature]] {
            continue;
        }
        // Prefix/suffix weight sums built without subtraction so an exact
        // separation yields an error of exactly zero.
        let mut wneg_prefix = vec![0.0; n + 1];
        let mut wpos_suffix = vec![0.0; n + 1];
        let mut wpos_prefix = vec![0.0; n + 1];
        let mut wneg_suffix = vec![0.0; n + 1];
        for i in 0..n {
            let idx = order[i];
            let (pos_w, neg_w) = if y[idx] > 0.0 {
                (weights[idx], 0.0)
            } else {
                (0.0, weights[idx])
            };
            wneg_prefix[i + 1] = wneg_prefix[i] + neg_w;
            wpos_prefix[i + 1] = wpos_prefix[i] + pos_w;
        }
        for i in (0..n).rev() {
            let idx = order[i];
            let (pos_w, neg_w) = if y[idx] > 0.0 {
                (weights[idx], 0.0)
            } else {
                (0.0, weights[idx])
            };
            wpos_suffix[i] = wpos_suffix[i + 1] + pos_w;
            wneg_suffix[i] = wneg_suffix[i + 1] + neg_w;
        }

        for cut in 1..n {
            let (lo, hi) = (x[[order[cut - 1], feature]], x[[order[cut], feature]]);
            if hi <= lo {
                continue;
            }
            let threshold = 0.5 * (lo + hi);
            // left_vote = +1: wrong on left negatives and right positives.
            let err_left_pos = wneg_prefix[cut] + wpos_suffix[cut];
            let err_left_neg = wpos_prefix[cut] + wneg_suffix[cut];
            for (err, left_vote) in [(err_left_pos, 1.0), (err_left_neg, -1.0)] {
                let candidate = Stump {
                    feature,
                    threshold,
                    left_vote,
                };
                if best.as_ref().is_none_or(|(b_err, _)| err < *b_err) {
                    best = Some((err, candidate));
                }
            }
        }
    }
    best.map(|(err, stump)| (stump, err))
}

impl AdaBoostModel {
    pub(crate) fn fit(params: &AdaBoostParams, train: &Dataset) -> Result<Self, ClassifierError> {
        if params.n_estimators == 0 {
            return Err(ClassifierError::InvalidParameter(
                "n_estimators must be >= 1".into(),
            ));
        }
        let n = train.len();
        let x = train.samples();
        let y: Vec<f64> = train.labels().iter().map(|l| l.as_f64()).collect();
        let mut weights = vec![1.0 / n as f64; n];
        let mut stages = Vec::new();

        for _ in 0..params.n_estimators {
            let Some((stump, err)) = best_stump(x, &y, &weights) else {
                break;
            };
            let alpha = stage_weight(err.clamp(ERROR_CLAMP, 1.0 - ERROR_CLAMP))?;
            let exact = err <= EXACT_FIT_EPS;
            stages.push((stump, alpha));
            if exact {
                break;
            }
            let stump = &stages.last().unwrap().0;
            let mut total = 0.0;
            for i in 0..n {
                weights[i] *= (-alpha * y[i] * stump.vote(x.row(i))).exp();
                total += weights[i];
            }
            for w in &mut weights {
                *w /= total;
            }
        }

        Ok(Self { stages })
    }

    pub(crate) fn scores(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let rows: Vec<_> = x.rows().into_iter().collect();
        rows.par_iter()
            .map(|row| {
                self.stages
                    .iter()
                    .map(|(stump, alpha)| alpha * stump.vote(*row))
                    .sum()
            })
            .collect()
    }
}
