//! Dataset loading, normalization, splitting, and synthesis.
//!
//! [`Dataset`] is the single container used by every other module: an `n x d`
//! feature matrix plus a length-`n` vector of binary labels (`-1` safe,
//! `+1` failed). Construction validates the invariants once so downstream
//! code never re-checks them.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by dataset ingestion, validation, and splitting.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("row {row}: label {value:?} is not -1 or +1")]
    BadLabel { row: usize, value: String },
    #[error("row {row}, column {col}: {value:?} is not a finite number")]
    NonNumericFeature {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("dataset contains only one class")]
    SingleClass,
    #[error("minority fraction {0} must lie in (0, 0.5)")]
    BadFraction(f64),
    #[error("test fraction {0} must lie in (0, 1)")]
    BadTestFraction(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Binary class label: `-1` (safe / majority) or `+1` (failed / minority).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Label::Pos)
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        label.as_i8()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(value: i8) -> Result<Self, Self::Error> {
        match value {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(format!("label {other} is not -1 or +1")),
        }
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "-1" => Ok(Label::Neg),
            "1" | "+1" => Ok(Label::Pos),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Neg => "-1",
            Label::Pos => "1",
        })
    }
}

/// Immutable labeled dataset: `n x d` features with one `-1`/`+1` label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Array2<f64>,
    labels: Vec<Label>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Validates shape agreement and feature finiteness.
    pub fn new(
        samples: Array2<f64>,
        labels: Vec<Label>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self, DataError> {
        if samples.nrows() != labels.len() {
            return Err(DataError::Shape(format!(
                "{} sample rows but {} labels",
                samples.nrows(),
                labels.len()
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != samples.ncols() {
                return Err(DataError::Shape(format!(
                    "{} feature names but {} columns",
                    names.len(),
                    samples.ncols()
                )));
            }
        }
        for ((row, col), &v) in samples.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonNumericFeature {
                    row,
                    col,
                    value: v.to_string(),
                });
            }
        }
        Ok(Self {
            samples,
            labels,
            feature_names,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// `(negatives, positives)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| l.is_positive()).count();
        (self.labels.len() - pos, pos)
    }

    /// Label of the strictly smaller class; `Pos` on a tie.
    pub fn minority_label(&self) -> Label {
        let (neg, pos) = self.class_counts();
        if neg < pos {
            Label::Neg
        } else {
            Label::Pos
        }
    }

    /// New dataset from the given row indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut samples = Array2::zeros((indices.len(), d));
        let mut labels = Vec::with_capacity(indices.len());
        for (out_row, &idx) in indices.iter().enumerate() {
            samples.row_mut(out_row).assign(&self.samples.row(idx));
            labels.push(self.labels[idx]);
        }
        Dataset {
            samples,
            labels,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Result of a stratified train/test split.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub test_fraction: f64,
    /// Original row indices of each split, ascending; the two lists are
    /// disjoint and together cover `0..n`.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Loads a comma-separated, one-header-row, UTF-8 CSV file.
///
/// `label_column` is resolved by header name first, then (if it parses as an
/// integer) by zero-based column index. Labels must be `-1` or `+1`/`1`;
/// every other cell must parse as a finite number. Rows keep file order.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .or_else(|| {
            label_column
                .parse::<usize>()
                .ok()
                .filter(|&i| i < headers.len())
        })
        .ok_or_else(|| DataError::MissingLabelColumn(label_column.to_owned()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let d = feature_names.len();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let raw_label = record.get(label_idx).unwrap_or("");
        let label: Label = raw_label.parse().map_err(|()| DataError::BadLabel {
            row,
            value: raw_label.to_owned(),
        })?;
        labels.push(label);
        for (col, (_, field)) in record
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_idx)
            .enumerate()
        {
            let v: f64 = field
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::NonNumericFeature {
                    row,
                    col,
                    value: field.to_owned(),
                })?;
            rows.push(v);
        }
    }

    let n = labels.len();
    let samples =
        Array2::from_shape_vec((n, d), rows).map_err(|e| DataError::Shape(e.to_string()))?;
    Dataset::new(samples, labels, Some(feature_names))
}

/// Writes a dataset as CSV with one header row (feature names then `label`).
///
/// Floats are written in shortest round-trip form, so write/load round-trips
/// are exact and the bytes are deterministic.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let names: Vec<String> = match ds.feature_names() {
        Some(names) => names.to_vec(),
        None => (1..=ds.dim()).map(|i| format!("f{i}")).collect(),
    };
    writeln!(w, "{},label", names.join(","))?;
    for (row, label) in ds.samples().rows().into_iter().zip(ds.labels()) {
        for v in row.iter() {
            write!(w, "{v},")?;
        }
        writeln!(w, "{label}")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-column min-max scaling to `[0, 1]`; constant columns map to all zeros.
///
/// Idempotent: normalizing twice gives bitwise-identical output.
pub fn normalize(ds: &Dataset) -> Dataset {
    let mut samples = ds.samples.clone();
    for mut col in samples.columns_mut() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            let span = hi - lo;
            col.mapv_inplace(|v| (v - lo) / span);
        } else {
            col.fill(0.0);
        }
    }
    Dataset {
        samples,
        labels: ds.labels.clone(),
        feature_names: ds.feature_names.clone(),
    }
}

/// Rounds half away from zero; the fixed rule for all fractional counts.
pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified shuffled split: each class is partitioned independently at
/// `test_fraction` (per-class test count rounded half-up), deterministically
/// for a fixed seed. Row order within each side follows the input.
pub fn stratified_split(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPair, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadTestFraction(test_fraction));
    }
    let mut neg_idx: Vec<usize> = Vec::new();
    let mut pos_idx: Vec<usize> = Vec::new();
    for (i, label) in ds.labels.iter().enumerate() {
        match label {
            Label::Neg => neg_idx.push(i),
            Label::Pos => pos_idx.push(i),
        }
    }
    if neg_idx.is_empty() || pos_idx.is_empty() {
        return Err(DataError::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = Vec::new();
    let mut train_indices = Vec::new();
    // Fixed class order keeps the RNG stream independent of label layout.
    for class in [&mut neg_idx, &mut pos_idx] {
        class.shuffle(&mut rng);
        let n_test = round_half_up(class.len() as f64 * test_fraction);
        test_indices.extend_from_slice(&class[..n_test]);
        train_indices.extend_from_slice(&class[n_test..]);
    }
    test_indices.sort_unstable();
    train_indices.sort_unstable();

    Ok(SplitPair {
        train: ds.subset(&train_indices),
        test: ds.subset(&test_indices),
        seed,
        test_fraction,
        train_indices,
        test_indices,
    })
}

/// Two isotropic Gaussian clusters with means `separation` apart along a
/// random unit direction: majority labeled `-1`, minority `+1`, with exactly
/// `round(n * minority_fraction)` minority rows (majority rows first).
pub fn generate_synthetic(
    n: usize,
    d: usize,
    minority_fraction: f64,
    separation: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if !(minority_fraction > 0.0 && minority_fraction < 0.5) {
        return Err(DataError::BadFraction(minority_fraction));
    }
    if n < 4 || d < 2 {
        return Err(DataError::Shape(format!(
            "need n >= 4 and d >= 2, got n={n}, d={d}"
        )));
    }
    let n_pos = round_half_up(n as f64 * minority_fraction);
    let n_neg = n - n_pos;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;

    let mut direction: Array1<f64> = Array1::zeros(d);
    for v in direction.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let norm = direction.dot(&direction).sqrt();
    if norm > 0.0 {
        direction.mapv_inplace(|v| v / norm);
    }

    let half = separation / 2.0;
    let mut samples = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let (sign, label) = if row < n_neg {
            (-half, Label::Neg)
        } else {
            (half, Label::Pos)
        };
        labels.push(label);
        for col in 0..d {
            let noise: f64 = normal.sample(&mut rng);
            samples[[row, col]] = sign * direction[col] + noise;
        }
    }

    let names = (1..=d).map(|i| format!("f{i}")).collect();
    Dataset::new(samples, labels, Some(names))
}
