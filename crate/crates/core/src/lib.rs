//! Visualization and classification of high-dimensional class-imbalanced
//! binary data.
//!
//! The crate bundles everything needed to go from a labeled feature matrix to
//! 2-D maps, balanced training sets, fitted classifiers, imbalance-aware
//! metrics, and SVG plots:
//!
//! * [`data`] — dataset loading, min-max normalization, stratified splitting,
//!   and a synthetic imbalanced-data generator.
//! * [`tsne`] — exact t-SNE: per-sample bandwidth calibration, Gaussian and
//!   Student-t affinities, KL objective/gradient, momentum gradient descent.
//! * [`smote`] — synthetic minority oversampling by nearest-neighbor
//!   interpolation.
//! * [`classifiers`] — six from-scratch binary classifiers (KNN, RBF-SVM,
//!   decision tree, random forest, MLP, AdaBoost) behind one
//!   fit/predict/score interface.
//! * [`metrics`] — confusion counts, precision/recall/F1, balanced accuracy,
//!   and rank-based ROC AUC.
//! * [`pipeline`] — the four experimental options crossing
//!   {raw, t-SNE} x {imbalanced, SMOTE-balanced} end to end.
//! * [`viz`] — deterministic SVG scatter plots and decision-surface panels.
//!
//! All randomized operations take explicit seeds and are bitwise reproducible
//! for a fixed seed, including under `rayon` parallelism.

pub mod classifiers;
pub mod data;
pub mod metrics;
pub mod pipeline;
mod seeding;
pub mod smote;
pub mod tsne;
pub mod viz;

pub use classifiers::{ClassifierError, ClassifierKind, ClassifierSpec, TrainedModel};
pub use data::{DataError, Dataset, Label, SplitPair};
pub use metrics::{ConfusionMatrix, MetricsError, MetricsReport};
pub use pipeline::{PipelineConfig, PipelineError, PipelineOption, SplitConfig};
pub use smote::{SmoteConfig, SmoteError};
pub use tsne::{AffinityMatrix, ConditionalAffinities, Embedding, TsneConfig, TsneError};
pub use viz::{GridBounds, PlotStyle, SurfaceGrid, VizError};
