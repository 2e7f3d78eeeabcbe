//! End-to-end runs of the four experimental options:
//!
//! 1. normalize -> split -> fit/evaluate in the original feature space
//! 2. normalize -> split -> SMOTE on the training rows -> fit/evaluate
//! 3. normalize -> t-SNE on all rows -> split -> fit/evaluate in 2-D
//! 4. normalize -> t-SNE on all rows -> split -> SMOTE in 2-D -> fit/evaluate
//!
//! Splitting always precedes oversampling, so SMOTE never sees a test row.
//! t-SNE, when used, embeds the full dataset before the split (the embedding
//! is transductive, so test-point geometry participates in it; the split
//! still assigns rows by index, identically across options for one seed).
//!
//! Each option writes its stage artifacts (embedding/resampled CSVs, model
//! files, training-map and decision-surface SVGs) under the configured
//! output directory with fixed names; a full run adds the metrics table in
//! CSV and JSON plus the perplexity-sweep maps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{fit, ClassifierError, ClassifierSpec, TrainedModel};
use crate::data::{self, DataError, Dataset, Label, SplitPair};
use crate::metrics::{self, MetricsError, MetricsReport};
use crate::seeding::derive_seed;
use crate::smote::{smote_oversample, SmoteConfig, SmoteError};
use crate::tsne::{self, Embedding, TsneConfig, TsneError};
use crate::viz::{self, GridBounds, PlotStyle, SurfacePanel, VizError};

/// The four pipeline variants crossing {raw, t-SNE} x {imbalanced, SMOTE}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineOption {
    One,
    Two,
    Three,
    Four,
}

impl PipelineOption {
    pub const ALL: [PipelineOption; 4] = [
        PipelineOption::One,
        PipelineOption::Two,
        PipelineOption::Three,
        PipelineOption::Four,
    ];

    pub fn as_u8(self) -> u8 {
        match self {
            PipelineOption::One => 1,
            PipelineOption::Two => 2,
            PipelineOption::Three => 3,
            PipelineOption::Four => 4,
        }
    }

    /// Options 3 and 4 classify in the embedded 2-D space.
    pub fn uses_tsne(self) -> bool {
        matches!(self, PipelineOption::Three | PipelineOption::Four)
    }

    /// Options 2 and 4 balance the training rows.
    pub fn uses_smote(self) -> bool {
        matches!(self, PipelineOption::Two | PipelineOption::Four)
    }
}

impl TryFrom<u8> for PipelineOption {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(PipelineOption::One),
            2 => Ok(PipelineOption::Two),
            3 => Ok(PipelineOption::Three),
            4 => Ok(PipelineOption::Four),
            other => Err(format!("option {other} is not in 1..=4")),
        }
    }
}

impl std::fmt::Display for PipelineOption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "option {}", self.as_u8())
    }
}

/// Train/test split parameters shared by every option in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            seed: 0,
        }
    }
}

/// Full configuration of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub option: PipelineOption,
    pub tsne: TsneConfig,
    pub smote: SmoteConfig,
    pub split: SplitConfig,
    pub classifiers: Vec<ClassifierSpec>,
    pub output_dir: PathBuf,
    /// Perplexities for the sweep figure emitted by full runs; empty skips it.
    pub sweep_perplexities: Vec<f64>,
    /// Cells per axis of the decision-surface grids.
    pub surface_resolution: usize,
}

impl PipelineConfig {
    /// Default configuration with all randomness derived from `seed`.
    pub fn with_seed(output_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            option: PipelineOption::One,
            tsne: TsneConfig {
                seed: derive_seed(seed, 11),
                ..TsneConfig::default()
            },
            smote: SmoteConfig {
                seed: derive_seed(seed, 12),
                ..SmoteConfig::default()
            },
            split: SplitConfig {
                test_fraction: 0.25,
                seed,
            },
            classifiers: ClassifierSpec::default_suite(seed),
            output_dir: output_dir.into(),
            sweep_perplexities: vec![],
            surface_resolution: 200,
        }
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tsne(#[from] TsneError),
    #[error(transparent)]
    Smote(#[from] SmoteError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A component failure annotated with the pipeline stage it occurred in.
#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: StageError,
}

fn at<E: Into<StageError>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        source: e.into(),
    }
}

/// Everything produced by one option run.
#[derive(Debug)]
pub struct OptionRun {
    pub option: PipelineOption,
    /// One report per configured classifier, in configuration order.
    pub reports: Vec<MetricsReport>,
    /// Fitted models, aligned with `reports`.
    pub models: Vec<TrainedModel>,
    /// Full-dataset embedding for options 3/4.
    pub embedding: Option<Embedding>,
    /// Original row indices of the split (ascending, disjoint).
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// A multi-option run.
#[derive(Debug)]
pub struct PipelineRun {
    pub runs: Vec<OptionRun>,
}

impl PipelineRun {
    /// All reports across options, flattened in run order.
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.runs.iter().flat_map(|r| r.reports.clone()).collect()
    }
}

/// Runs the option selected in `cfg.option` and writes its artifacts.
pub fn run_option(ds: &Dataset, cfg: &PipelineConfig) -> Result<OptionRun, PipelineError> {
    run_option_inner(ds, cfg, None)
}

fn run_option_inner(
    ds: &Dataset,
    cfg: &PipelineConfig,
    cached_embedding: Option<&Embedding>,
) -> Result<OptionRun, PipelineError> {
    let normalized = data::normalize(ds);

    let (work, embedding) = if cfg.option.uses_tsne() {
        // The cache only ever holds the embedding of this same normalized
        // dataset under this same t-SNE config, so reuse is bit-exact.
        let embedding = match cached_embedding {
            Some(e) => e.clone(),
            None => tsne::run_tsne(&normalized.samples().view(), &cfg.tsne).map_err(at("tsne"))?,
        };
        let embedded = Dataset::new(
            embedding.points.clone(),
            normalized.labels().to_vec(),
            Some(vec!["x".into(), "y".into()]),
        )
        .map_err(at("tsne"))?;
        (embedded, Some(embedding))
    } else {
        (normalized.clone(), None)
    };

    let split = data::stratified_split(&work, cfg.split.test_fraction, cfg.split.seed)
        .map_err(at("split"))?;
    let train = if cfg.option.uses_smote() {
        smote_oversample(&split.train, &cfg.smote).map_err(at("smote"))?
    } else {
        split.train.clone()
    };

    let mut models = Vec::with_capacity(cfg.classifiers.len());
    let mut reports = Vec::with_capacity(cfg.classifiers.len());
    for spec in &cfg.classifiers {
        let model = fit(spec, &train).map_err(at("fit"))?;
        let scores = model
            .predict_score(&split.test.samples().view())
            .map_err(at("predict"))?;
        let threshold = model.score_threshold();
        let preds: Vec<Label> = scores
            .iter()
            .map(|&s| {
                if s >= threshold {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        let report = metrics::evaluate(
            spec.kind(),
            cfg.option.as_u8(),
            split.test.labels(),
            &preds,
            &scores,
        )
        .map_err(at("metrics"))?;
        models.push(model);
        reports.push(report);
    }

    write_option_artifacts(
        cfg,
        &normalized,
        &split,
        &train,
        embedding.as_ref(),
        &models,
    )?;

    Ok(OptionRun {
        option: cfg.option,
        reports,
        models,
        embedding,
        train_indices: split.train_indices,
        test_indices: split.test_indices,
    })
}

/// Runs the given options with shared seeds (and a shared embedding for the
/// t-SNE options), then writes the combined metrics table and, if requested,
/// the perplexity-sweep maps.
pub fn run_options(
    ds: &Dataset,
    base: &PipelineConfig,
    options: &[PipelineOption],
) -> Result<PipelineRun, PipelineError> {
    let mut shared_embedding: Option<Embedding> = None;
    let mut runs = Vec::with_capacity(options.len());
    for &option in options {
        let cfg = PipelineConfig {
            option,
            ..base.clone()
        };
        let run = run_option_inner(ds, &cfg, shared_embedding.as_ref())?;
        if shared_embedding.is_none() {
            shared_embedding = run.embedding.clone();
        }
        runs.push(run);
    }

    let run = PipelineRun { runs };
    fs::create_dir_all(&base.output_dir).map_err(at("artifacts"))?;
    let reports = run.reports();
    fs::write(
        base.output_dir.join("metrics_table.csv"),
        metrics::table_csv(&reports),
    )
    .map_err(at("artifacts"))?;
    fs::write(
        base.output_dir.join("metrics_table.json"),
        metrics::reports_json(&reports).map_err(at("artifacts"))?,
    )
    .map_err(at("artifacts"))?;

    if !base.sweep_perplexities.is_empty() {
        let normalized = data::normalize(ds);
        let sweeps = tsne::perplexity_sweep(
            &normalized.samples().view(),
            &base.tsne,
            &base.sweep_perplexities,
        )
        .map_err(at("sweep"))?;
        for (value, embedding) in base.sweep_perplexities.iter().zip(&sweeps) {
            let name = format!("fig3_perplexity_{}.svg", fmt_value(*value));
            let style = PlotStyle::titled(format!("t-SNE map, perplexity {}", fmt_value(*value)));
            let svg = viz::scatter_svg(&embedding.points.view(), normalized.labels(), &style);
            fs::write(base.output_dir.join(name), svg).map_err(at("sweep"))?;
        }
    }

    Ok(run)
}

/// Runs all four options.
pub fn run_all(ds: &Dataset, base: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    run_options(ds, base, &PipelineOption::ALL)
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn write_option_artifacts(
    cfg: &PipelineConfig,
    normalized: &Dataset,
    split: &SplitPair,
    train: &Dataset,
    embedding: Option<&Embedding>,
    models: &[TrainedModel],
) -> Result<(), PipelineError> {
    let dir: &Path = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(at("artifacts"))?;
    let opt = cfg.option.as_u8();

    for model in models {
        let name = format!("model_opt{opt}_{}.json", model.kind().file_stem());
        model.save(&dir.join(name)).map_err(at("artifacts"))?;
    }

    if cfg.option.uses_smote() {
        data::write_csv(train, &dir.join(format!("train_resampled_opt{opt}.csv")))
            .map_err(at("artifacts"))?;
    }

    let Some(embedding) = embedding else {
        return Ok(());
    };
    tsne::write_embedding_csv(
        &embedding.points.view(),
        normalized.labels(),
        &dir.join(format!("embedding_opt{opt}.csv")),
    )
    .map_err(at("artifacts"))?;

    // Training-map scatter: imbalanced for option 3, SMOTE-balanced for 4.
    let map_note = if cfg.option.uses_smote() {
        "SMOTE-balanced"
    } else {
        "imbalanced"
    };
    let style = PlotStyle::titled(format!("Training map, {} ({map_note})", cfg.option));
    let svg = viz::scatter_svg(&train.samples().view(), train.labels(), &style);
    fs::write(dir.join(format!("fig4_option{opt}_train.svg")), svg).map_err(at("artifacts"))?;

    // Decision-surface comparison grid over the full embedding extent.
    let bounds = GridBounds::covering(&embedding.points.view(), 0.1);
    let mut grids = Vec::with_capacity(models.len());
    for model in models {
        grids.push(
            viz::decision_surface(model, bounds, cfg.surface_resolution).map_err(at("surface"))?,
        );
    }
    let panels: Vec<SurfacePanel<'_>> = models
        .iter()
        .zip(&grids)
        .map(|(model, grid)| SurfacePanel {
            title: format!("{} ({})", model.kind(), cfg.option),
            grid,
            threshold: model.score_threshold(),
            train_points: train.samples().view(),
            train_labels: train.labels(),
            test_points: split.test.samples().view(),
            test_labels: split.test.labels(),
        })
        .collect();
    let svg = viz::surface_panels_svg(&panels, 3, 340, 300, 2.0);
    fs::write(dir.join(format!("fig5_option{opt}_surfaces.svg")), svg).map_err(at("artifacts"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ClassifierKind, KnnParams, TreeParams};
    use crate::data::generate_synthetic;

    fn small_config(dir: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::with_seed(dir, 7);
        // Keep the unit-level runs quick: two cheap classifiers, short t-SNE.
        cfg.classifiers = vec![
            ClassifierSpec::Knn(KnnParams::default()),
            ClassifierSpec::DecisionTree(TreeParams::default()),
        ];
        cfg.tsne.iterations = 60;
        cfg.tsne.exaggeration_iters = 20;
        cfg.tsne.momentum_switch_iter = 20;
        cfg.tsne.perplexity = 10.0;
        cfg.surface_resolution = 24;
        cfg
    }

    #[test]
    fn option2_balances_train_but_not_test() {
        let ds = generate_synthetic(140, 4, 0.2, 2.0, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.option = PipelineOption::Two;
        let run = run_option(&ds, &cfg).unwrap();

        // Test rows keep the imbalanced stratified counts.
        let test = ds.subset(&run.test_indices);
        let (test_neg, test_pos) = test.class_counts();
        assert_eq!(test_pos, 7); // round(28 * 0.25)
        assert_eq!(test_neg, 28);
        // The resampled training CSV is balanced.
        let resampled =
            data::load_csv(&dir.path().join("train_resampled_opt2.csv"), "label").unwrap();
        let (neg, pos) = resampled.class_counts();
        assert_eq!(neg, pos);

        // Row identity: no test row (in the normalized space the classifiers
        // see) appears in the resampled training data.
        let normalized_test = data::normalize(&ds).subset(&run.test_indices);
        for test_row in normalized_test.samples().rows() {
            for train_row in resampled.samples().rows() {
                assert_ne!(test_row, train_row, "test row leaked into training data");
            }
        }
    }

    #[test]
    fn options_share_test_membership() {
        let ds = generate_synthetic(90, 4, 0.3, 2.0, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let run = run_options(&ds, &cfg, &[PipelineOption::One, PipelineOption::Three]).unwrap();
        assert_eq!(run.runs[0].test_indices, run.runs[1].test_indices);
        assert!(run.runs[1].embedding.is_some());
    }

    #[test]
    fn full_run_produces_all_reports_and_artifacts() {
        let ds = generate_synthetic(80, 3, 0.25, 2.5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.sweep_perplexities = vec![5.0, 10.0];
        let run = run_all(&ds, &cfg).unwrap();

        assert_eq!(run.runs.len(), 4);
        let reports = run.reports();
        assert_eq!(reports.len(), 4 * cfg.classifiers.len());
        for r in &reports {
            for v in [r.precision, r.recall, r.f1, r.balanced_accuracy, r.auc] {
                assert!((0.0..=1.0).contains(&v), "metric {v} out of range");
            }
        }
        for name in [
            "metrics_table.csv",
            "metrics_table.json",
            "embedding_opt3.csv",
            "embedding_opt4.csv",
            "train_resampled_opt2.csv",
            "train_resampled_opt4.csv",
            "fig3_perplexity_5.svg",
            "fig3_perplexity_10.svg",
            "fig4_option3_train.svg",
            "fig4_option4_train.svg",
            "fig5_option3_surfaces.svg",
            "fig5_option4_surfaces.svg",
            "model_opt1_knn.json",
            "model_opt4_dt.json",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }

        let table = std::fs::read_to_string(dir.path().join("metrics_table.csv")).unwrap();
        assert!(table.starts_with("classifier,opt1_pre"));
        assert_eq!(table.lines().count(), 1 + cfg.classifiers.len());
    }

    #[test]
    fn split_indices_are_disjoint_and_smote_keeps_train_rows_first() {
        let ds = generate_synthetic(100, 3, 0.2, 2.0, 13).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.option = PipelineOption::Two;
        let run = run_option(&ds, &cfg).unwrap();
        for i in &run.train_indices {
            assert!(!run.test_indices.contains(i));
        }
        assert_eq!(run.train_indices.len() + run.test_indices.len(), ds.len());
    }

    #[test]
    fn errors_carry_the_stage_name() {
        use crate::data::Label;
        use ndarray::Array2;

        let samples = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
        let single_class = Dataset::new(samples, vec![Label::Neg; 10], None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let err = run_option(&single_class, &cfg).unwrap_err();
        assert_eq!(err.stage, "split");
        assert!(err.to_string().contains("split"));
    }

    #[test]
    fn option_reports_carry_option_id_and_kind() {
        let ds = generate_synthetic(60, 3, 0.3, 2.0, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.option = PipelineOption::One;
        let run = run_option(&ds, &cfg).unwrap();
        assert_eq!(run.reports[0].option, 1);
        assert_eq!(run.reports[0].classifier, ClassifierKind::Knn);
        assert_eq!(run.reports[1].classifier, ClassifierKind::DecisionTree);
    }
}
