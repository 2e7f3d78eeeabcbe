//! Random forest: bagged Gini trees with per-split feature subsampling.
//!
//! Each tree draws its own bootstrap sample (n rows with replacement) and a
//! per-tree RNG derived from the forest seed, so training is deterministic
//! and trees can be grown in parallel. The forest score is the mean of the
//! per-tree leaf positive fractions.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seeding::derive_seed;

use super::tree::{FeatureSampler, TreeBuilder, TreeNode};
use super::ClassifierError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub max_depth: usize,
    pub n_estimators: usize,
    /// Non-constant features examined per split.
    pub max_features: usize,
    /// Draw n rows with replacement per tree; disable to train every tree on
    /// the full data (with `n_estimators = 1` and `max_features >= d` this
    /// reproduces the plain decision tree exactly).
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            n_estimators: 10,
            max_features: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    pub(crate) fn fit(params: &ForestParams, train: &Dataset) -> Result<Self, ClassifierError> {
        if params.n_estimators == 0 || params.max_features == 0 || params.max_depth == 0 {
            return Err(ClassifierError::InvalidParameter(
                "n_estimators, max_features, and max_depth must be >= 1".into(),
            ));
        }
        let n = train.len();
        let is_pos: Vec<bool> = train.labels().iter().map(|l| l.is_positive()).collect();
        let builder = TreeBuilder {
            x: train.samples(),
            is_pos: &is_pos,
            max_depth: params.max_depth,
            min_split: 2,
        };

        let trees: Vec<TreeNode> = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, t as u64));
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut sampler = FeatureSampler::Random {
                    rng: Box::new(rng),
                    max_features: params.max_features,
                };
                builder.grow(&indices, 0, &mut sampler)
            })
            .collect();

        Ok(Self { trees })
    }

    pub(crate) fn scores(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let rows: Vec<_> = x.rows().into_iter().collect();
        rows.par_iter()
            .map(|row| {
                self.trees.iter().map(|t| t.score(*row)).sum::<f64>() / self.trees.len() as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::{training_accuracy, two_clusters};
    use super::super::tree::TreeParams;
    use super::super::{fit, ClassifierSpec};
    use super::*;

    #[test]
    fn forest_learns_separated_clusters() {
        let train = two_clusters(100, 4.0, 23);
        let spec = ClassifierSpec::RandomForest(ForestParams {
            seed: 7,
            ..ForestParams::default()
        });
        let model = fit(&spec, &train).unwrap();
        assert!(training_accuracy(&model, &train) >= 0.95);
    }

    #[test]
    fn single_tree_without_bootstrap_equals_decision_tree() {
        let train = two_clusters(80, 1.0, 31);
        let forest_spec = ClassifierSpec::RandomForest(ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_features: train.dim(),
            seed: 5,
            ..ForestParams::default()
        });
        let tree_spec = ClassifierSpec::DecisionTree(TreeParams::default());
        let forest = fit(&forest_spec, &train).unwrap();
        let tree = fit(&tree_spec, &train).unwrap();
        let probe = two_clusters(50, 1.0, 32);
        assert_eq!(
            forest.predict(&probe.samples().view()).unwrap(),
            tree.predict(&probe.samples().view()).unwrap()
        );
    }

    #[test]
    fn fit_is_deterministic() {
        let train = two_clusters(60, 2.0, 3);
        let params = ForestParams {
            seed: 11,
            ..ForestParams::default()
        };
        let a = ForestModel::fit(&params, &train).unwrap();
        let b = ForestModel::fit(&params, &train).unwrap();
        assert_eq!(
            a.scores(&train.samples().view()),
            b.scores(&train.samples().view())
        );
    }

    #[test]
    fn different_seeds_give_different_forests() {
        let train = two_clusters(60, 0.8, 3);
        let a = ForestModel::fit(
            &ForestParams {
                seed: 1,
                ..ForestParams::default()
            },
            &train,
        )
        .unwrap();
        let b = ForestModel::fit(
            &ForestParams {
                seed: 2,
                ..ForestParams::default()
            },
            &train,
        )
        .unwrap();
        assert_ne!(
            a.scores(&train.samples().view()),
            b.scores(&train.samples().view())
        );
    }
}
