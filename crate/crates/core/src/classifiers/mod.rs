//! Six from-scratch binary classifiers behind one fit/predict/score
//! interface.
//!
//! Score semantics per kind:
//!
//! | kind          | score                                   | threshold |
//! |---------------|-----------------------------------------|-----------|
//! | KNN           | fraction of `+1` neighbors              | 0.5       |
//! | RBF SVM       | decision function value                 | 0.0       |
//! | decision tree | leaf positive fraction                  | 0.5       |
//! | random forest | tree-averaged leaf positive fraction    | 0.5       |
//! | MLP           | sigmoid output                          | 0.5       |
//! | AdaBoost      | weighted stump sum                      | 0.0       |
//!
//! `predict` is always `score >= threshold -> +1`, so predictions and scores
//! can never disagree.

pub mod adaboost;
pub mod forest;
pub mod knn;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Label};
use crate::seeding::derive_seed;

pub use adaboost::{stage_weight, AdaBoostParams};
pub use forest::ForestParams;
pub use knn::KnnParams;
pub use mlp::MlpParams;
pub use svm::SvmRbfParams;
pub use tree::TreeParams;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data contains only one class")]
    SingleClass,
    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("stage error {0} outside (0, 1)")]
    DegenerateError(f64),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The six classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "SVM")]
    SvmRbf,
    #[serde(rename = "DT")]
    DecisionTree,
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "AdaBoost")]
    AdaBoost,
}

impl ClassifierKind {
    /// Fixed report/table row order.
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Knn,
        ClassifierKind::SvmRbf,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::Mlp,
        ClassifierKind::AdaBoost,
    ];

    /// Lowercase identifier used in artifact file names.
    pub fn file_stem(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::SvmRbf => "svm",
            ClassifierKind::DecisionTree => "dt",
            ClassifierKind::RandomForest => "rf",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::AdaBoost => "adaboost",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassifierKind::Knn => "KNN",
            ClassifierKind::SvmRbf => "SVM",
            ClassifierKind::DecisionTree => "DT",
            ClassifierKind::RandomForest => "RF",
            ClassifierKind::Mlp => "MLP",
            ClassifierKind::AdaBoost => "AdaBoost",
        })
    }
}

/// A classifier family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassifierSpec {
    Knn(KnnParams),
    SvmRbf(SvmRbfParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Mlp(MlpParams),
    AdaBoost(AdaBoostParams),
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Knn(_) => ClassifierKind::Knn,
            ClassifierSpec::SvmRbf(_) => ClassifierKind::SvmRbf,
            ClassifierSpec::DecisionTree(_) => ClassifierKind::DecisionTree,
            ClassifierSpec::RandomForest(_) => ClassifierKind::RandomForest,
            ClassifierSpec::Mlp(_) => ClassifierKind::Mlp,
            ClassifierSpec::AdaBoost(_) => ClassifierKind::AdaBoost,
        }
    }

    /// All six classifiers with their default hyperparameters
    /// (k=3; gamma=2, C=1; depth 5; depth 5 / 10 trees / 1 feature;
    /// 100 hidden units, alpha=1, 1000 epochs; 50 stumps), with per-model
    /// seeds derived from `seed`.
    pub fn default_suite(seed: u64) -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::Knn(KnnParams::default()),
            ClassifierSpec::SvmRbf(SvmRbfParams {
                seed: derive_seed(seed, 1),
                ..SvmRbfParams::default()
            }),
            ClassifierSpec::DecisionTree(TreeParams::default()),
            ClassifierSpec::RandomForest(ForestParams {
                seed: derive_seed(seed, 2),
                ..ForestParams::default()
            }),
            ClassifierSpec::Mlp(MlpParams {
                seed: derive_seed(seed, 3),
                ..MlpParams::default()
            }),
            ClassifierSpec::AdaBoost(AdaBoostParams::default()),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum ModelInner {
    Knn(knn::KnnModel),
    Svm(svm::SvmModel),
    Tree(tree::TreeModel),
    Forest(forest::ForestModel),
    Mlp(mlp::MlpModel),
    AdaBoost(adaboost::AdaBoostModel),
}

/// A fitted classifier. Immutable after `fit`, safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    kind: ClassifierKind,
    n_train: usize,
    dim: usize,
    converged: bool,
    inner: ModelInner,
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

/// Trains `spec` on `train`. Deterministic given the spec's seed.
///
/// All kinds except KNN require both classes. Iterative solvers that hit
/// their budget return a best-effort model with `converged() == false`
/// rather than an error.
pub fn fit(spec: &ClassifierSpec, train: &Dataset) -> Result<TrainedModel, ClassifierError> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let (neg, pos) = train.class_counts();
    if !matches!(spec, ClassifierSpec::Knn(_)) && (neg == 0 || pos == 0) {
        return Err(ClassifierError::SingleClass);
    }

    let mut converged = true;
    let inner = match spec {
        ClassifierSpec::Knn(p) => ModelInner::Knn(knn::KnnModel::fit(p, train)?),
        ClassifierSpec::SvmRbf(p) => {
            let (model, ok) = svm::SvmModel::fit(p, train)?;
            converged = ok;
            ModelInner::Svm(model)
        }
        ClassifierSpec::DecisionTree(p) => ModelInner::Tree(tree::TreeModel::fit(p, train)?),
        ClassifierSpec::RandomForest(p) => ModelInner::Forest(forest::ForestModel::fit(p, train)?),
        ClassifierSpec::Mlp(p) => {
            let (model, ok) = mlp::fit(p, train)?;
            converged = ok;
            ModelInner::Mlp(model)
        }
        ClassifierSpec::AdaBoost(p) => {
            ModelInner::AdaBoost(adaboost::AdaBoostModel::fit(p, train)?)
        }
    };

    Ok(TrainedModel {
        kind: spec.kind(),
        n_train: train.len(),
        dim: train.dim(),
        converged,
        inner,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    /// Feature dimensionality the model was trained on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// False when an iterative solver exhausted its budget.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Decision threshold paired with `predict_score`: 0 for margin scores
    /// (SVM, AdaBoost), 0.5 for probability-like scores.
    pub fn score_threshold(&self) -> f64 {
        match self.kind {
            ClassifierKind::SvmRbf | ClassifierKind::AdaBoost => 0.0,
            _ => 0.5,
        }
    }

    /// Monotone score for class `+1`, one value per row of `x`.
    pub fn predict_score(&self, x: &ArrayView2<f64>) -> Result<Vec<f64>, ClassifierError> {
        if x.ncols() != self.dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim,
                got: x.ncols(),
            });
        }
        Ok(match &self.inner {
            ModelInner::Knn(m) => m.scores(x),
            ModelInner::Svm(m) => m.scores(x),
            ModelInner::Tree(m) => m.scores(x),
            ModelInner::Forest(m) => m.scores(x),
            ModelInner::Mlp(m) => m.scores(x),
            ModelInner::AdaBoost(m) => m.scores(x),
        })
    }

    /// Hard labels: `score >= threshold -> +1`.
    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Vec<Label>, ClassifierError> {
        let threshold = self.score_threshold();
        Ok(self
            .predict_score(x)?
            .into_iter()
            .map(|s| {
                if s >= threshold {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect())
    }

    /// The fitted SVM internals, if this is an SVM.
    pub fn as_svm(&self) -> Option<&svm::SvmModel> {
        match &self.inner {
            ModelInner::Svm(m) => Some(m),
            _ => None,
        }
    }

    /// The fitted MLP internals, if this is an MLP.
    pub fn as_mlp(&self) -> Option<&mlp::MlpModel> {
        match &self.inner {
            ModelInner::Mlp(m) => Some(m),
            _ => None,
        }
    }

    /// Writes the model as versioned JSON.
    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let file = File::create(path)?;
        let payload = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(BufWriter::new(file), &payload)?;
        Ok(())
    }

    /// Reads a model written by [`TrainedModel::save`].
    pub fn load(path: &Path) -> Result<TrainedModel, ClassifierError> {
        let file = File::open(path)?;
        let payload: ModelFile = serde_json::from_reader(BufReader::new(file))?;
        if payload.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::UnsupportedVersion(payload.format_version));
        }
        Ok(payload.model)
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use crate::data::{Dataset, Label};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two Gaussian blobs in 2-D, `separation` apart along x, half per class.
    pub fn two_clusters(n: usize, separation: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let (center, label) = if i % 2 == 0 {
                (0.0, Label::Neg)
            } else {
                (separation, Label::Pos)
            };
            samples[[i, 0]] = center + rng.random::<f64>() - 0.5;
            samples[[i, 1]] = rng.random::<f64>() - 0.5;
            labels.push(label);
        }
        Dataset::new(samples, labels, None).unwrap()
    }

    pub fn training_accuracy(model: &super::TrainedModel, ds: &Dataset) -> f64 {
        let preds = model.predict(&ds.samples().view()).unwrap();
        let hits = preds
            .iter()
            .zip(ds.labels())
            .filter(|(p, t)| p == t)
            .count();
        hits as f64 / ds.len() as f64
    }
}
