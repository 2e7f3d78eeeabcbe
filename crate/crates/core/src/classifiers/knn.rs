//! K-nearest-neighbors classifier. Stores the training set and votes over
//! the `k` nearest rows by Euclidean distance, ties broken by lower row
//! index. The score is the fraction of `+1` votes.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};

use super::ClassifierError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    train_x: Array2<f64>,
    train_y: Vec<Label>,
}

impl KnnModel {
    pub(crate) fn fit(params: &KnnParams, train: &Dataset) -> Result<Self, ClassifierError> {
        if params.k == 0 {
            return Err(ClassifierError::InvalidParameter("k must be >= 1".into()));
        }
        Ok(Self {
            k: params.k.min(train.len()),
            train_x: train.samples().clone(),
            train_y: train.labels().to_vec(),
        })
    }

    fn score_one(&self, query: ArrayView1<f64>) -> f64 {
        let mut dists: Vec<(f64, usize)> = self
            .train_x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let d2 = row
                    .iter()
                    .zip(query.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, i)
            })
            .collect();
        // (distance, index) is a total order, so the k-element prefix set is
        // unique and selection is deterministic.
        if self.k < dists.len() {
            dists
                .select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let votes = dists[..self.k]
            .iter()
            .filter(|(_, i)| self.train_y[*i].is_positive())
            .count();
        votes as f64 / self.k as f64
    }

    pub(crate) fn scores(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let rows: Vec<_> = x.rows().into_iter().collect();
        rows.par_iter().map(|row| self.score_one(*row)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model(k: usize, x: Array2<f64>, y: Vec<Label>) -> KnnModel {
        let ds = Dataset::new(x, y, None).unwrap();
        KnnModel::fit(&KnnParams { k }, &ds).unwrap()
    }

    #[test]
    fn two_of_three_majority() {
        let m = model(
            3,
            array![[0.0, 0.0], [0.0, 1.0], [5.0, 5.0]],
            vec![Label::Neg, Label::Neg, Label::Pos],
        );
        let scores = m.scores(&array![[0.0, 0.5]].view());
        assert_eq!(scores, vec![1.0 / 3.0]);
    }

    #[test]
    fn neighbor_fraction_score() {
        // Neighbors labeled {+1, +1, -1} -> score 2/3.
        let m = model(
            3,
            array![[0.0], [0.1], [0.2], [9.0]],
            vec![Label::Pos, Label::Pos, Label::Neg, Label::Neg],
        );
        let scores = m.scores(&array![[0.05]].view());
        assert_eq!(scores, vec![2.0 / 3.0]);
    }

    #[test]
    fn constant_labels_vote_unanimously() {
        let m = model(
            2,
            array![[0.0], [1.0], [2.0]],
            vec![Label::Pos, Label::Pos, Label::Pos],
        );
        assert_eq!(m.scores(&array![[10.0]].view()), vec![1.0]);
    }

    #[test]
    fn distance_ties_break_by_lower_index() {
        // Query equidistant from rows 0 (+1) and 2 (-1); k = 1 must take row 0.
        let m = model(
            1,
            array![[-1.0], [5.0], [1.0]],
            vec![Label::Pos, Label::Neg, Label::Neg],
        );
        assert_eq!(m.scores(&array![[0.0]].view()), vec![1.0]);
    }

    #[test]
    fn k_clamped_to_training_size() {
        let m = model(10, array![[0.0], [1.0]], vec![Label::Pos, Label::Neg]);
        assert_eq!(m.scores(&array![[0.4]].view()), vec![0.5]);
    }
}
