//! Confusion-matrix statistics and rank-based ROC AUC for imbalanced binary
//! classification. The positive class is `+1` (failed) throughout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::ClassifierKind;
use crate::data::Label;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {expected} true labels vs {got} predictions")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("both classes must be present")]
    SingleClass,
}

/// Binary confusion counts; positives are `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_positives: usize,
    #[serde(rename = "fp")]
    pub false_positives: usize,
    #[serde(rename = "tn")]
    pub true_negatives: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// TP / (TP + FP); 0 when the denominator is 0.
    pub fn precision(&self) -> f64 {
        ratio(
            self.true_positives,
            self.true_positives + self.false_positives,
        )
    }

    /// TP / (TP + FN); 0 when the denominator is 0.
    pub fn recall(&self) -> f64 {
        ratio(
            self.true_positives,
            self.true_positives + self.false_negatives,
        )
    }

    /// 2PR / (P + R); 0 when P + R is 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Mean of the per-class recalls: (TP/(TP+FN) + TN/(TN+FP)) / 2.
    /// An absent class contributes 0 to its term.
    pub fn balanced_accuracy(&self) -> f64 {
        let sensitivity = ratio(
            self.true_positives,
            self.true_positives + self.false_negatives,
        );
        let specificity = ratio(
            self.true_negatives,
            self.true_negatives + self.false_positives,
        );
        0.5 * (sensitivity + specificity)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Exact confusion counts of predictions against ground truth.
pub fn confusion(y_true: &[Label], y_pred: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (Label::Pos, Label::Pos) => cm.true_positives += 1,
            (Label::Neg, Label::Pos) => cm.false_positives += 1,
            (Label::Neg, Label::Neg) => cm.true_negatives += 1,
            (Label::Pos, Label::Neg) => cm.false_negatives += 1,
        }
    }
    Ok(cm)
}

/// Area under the ROC curve via the rank statistic: the probability that a
/// random positive outscores a random negative, ties counted half.
///
/// Win and tie pair counts are accumulated as integers over a single sorted
/// sweep, so the result agrees exactly with brute-force pair counting.
pub fn auc_roc(y_true: &[Label], scores: &[f64]) -> Result<f64, MetricsError> {
    if y_true.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            expected: y_true.len(),
            got: scores.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n_pos = y_true.iter().filter(|l| l.is_positive()).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_pos: u64 = 0;
        let mut group_neg: u64 = 0;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if y_true[order[j]].is_positive() {
                group_pos += 1;
            } else {
                group_neg += 1;
            }
            j += 1;
        }
        wins += group_pos * neg_below;
        ties += group_pos * group_neg;
        neg_below += group_neg;
        i = j;
    }

    let pairs = n_pos as f64 * n_neg as f64;
    Ok((wins as f64 + 0.5 * ties as f64) / pairs)
}

/// All evaluation numbers for one classifier under one pipeline option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classifier: ClassifierKind,
    /// Pipeline option id in `1..=4`.
    pub option: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub auc: f64,
    pub confusion: ConfusionMatrix,
}

/// Builds the full report for one classifier/option cell.
pub fn evaluate(
    classifier: ClassifierKind,
    option: u8,
    y_true: &[Label],
    y_pred: &[Label],
    scores: &[f64],
) -> Result<MetricsReport, MetricsError> {
    let cm = confusion(y_true, y_pred)?;
    let auc = auc_roc(y_true, scores)?;
    Ok(MetricsReport {
        classifier,
        option,
        precision: cm.precision(),
        recall: cm.recall(),
        f1: cm.f1(),
        balanced_accuracy: cm.balanced_accuracy(),
        auc,
        confusion: cm,
    })
}

const METRIC_NAMES: [&str; 5] = ["pre", "rec", "f1", "acc", "auc"];

fn metric_values(r: &MetricsReport) -> [f64; 5] {
    [r.precision, r.recall, r.f1, r.balanced_accuracy, r.auc]
}

fn find(reports: &[MetricsReport], kind: ClassifierKind, option: u8) -> Option<&MetricsReport> {
    reports
        .iter()
        .find(|r| r.classifier == kind && r.option == option)
}

fn present_kinds(reports: &[MetricsReport]) -> Vec<ClassifierKind> {
    ClassifierKind::ALL
        .into_iter()
        .filter(|k| reports.iter().any(|r| r.classifier == *k))
        .collect()
}

/// Aligned text table: one classifier per row, four option blocks of five
/// metrics each, rounded to two decimals (missing cells blank).
pub fn table_text(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "classifier");
    for option in 1..=4u8 {
        let _ = write!(out, "| option {option}{:<pad$}", "", pad = 5 * 6 - 9);
    }
    out.push('\n');
    let _ = write!(out, "{:<10}", "");
    for _ in 1..=4 {
        out.push('|');
        for name in METRIC_NAMES {
            let _ = write!(out, " {name:<5}");
        }
    }
    out.push('\n');
    for kind in present_kinds(reports) {
        let _ = write!(out, "{:<10}", kind.to_string());
        for option in 1..=4u8 {
            out.push('|');
            match find(reports, kind, option) {
                Some(r) => {
                    for v in metric_values(r) {
                        let _ = write!(out, " {v:<5.2}");
                    }
                }
                None => {
                    for _ in METRIC_NAMES {
                        let _ = write!(out, " {:<5}", "");
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

/// CSV rendering of the same table: `classifier,opt1_pre,...,opt4_auc`,
/// values rounded to two decimals, missing cells empty.
pub fn table_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("classifier");
    for option in 1..=4u8 {
        for name in METRIC_NAMES {
            let _ = write!(out, ",opt{option}_{name}");
        }
    }
    out.push('\n');
    for kind in present_kinds(reports) {
        let _ = write!(out, "{kind}");
        for option in 1..=4u8 {
            match find(reports, kind, option) {
                Some(r) => {
                    for v in metric_values(r) {
                        let _ = write!(out, ",{v:.2}");
                    }
                }
                None => out.push_str(",,,,,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Full-precision JSON array of reports.
pub fn reports_json(reports: &[MetricsReport]) -> serde_json::Result<String> {
    serde_json::to_string_pretty(reports)
}
