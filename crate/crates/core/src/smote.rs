//! Synthetic Minority Oversampling (SMOTE).
//!
//! New minority samples are linear interpolations `x + u * (x_nn - x)` with
//! `u ~ U[0, 1)`, where `x` walks the minority class round-robin and `x_nn`
//! is drawn uniformly from `x`'s `k` nearest minority neighbors. Majority
//! rows are never touched and original rows always come first, verbatim.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{round_half_up, Dataset};

#[derive(Debug, Error)]
pub enum SmoteError {
    #[error("both classes must be present")]
    SingleClass,
    #[error("need at least 2 minority samples, got {0}")]
    InsufficientMinority(usize),
    #[error("target ratio {0} must lie in (0, 1]")]
    BadRatio(f64),
    #[error("k_neighbors must be >= 1")]
    BadK,
}

/// SMOTE parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    /// Number of minority nearest neighbors to interpolate toward.
    pub k_neighbors: usize,
    pub seed: u64,
    /// Desired minority/majority count ratio after resampling, in (0, 1].
    pub target_ratio: f64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            seed: 0,
            target_ratio: 1.0,
        }
    }
}

/// Appends interpolated minority rows until the class ratio reaches
/// `target_ratio` (within one sample). Deterministic for a fixed seed.
pub fn smote_oversample(train: &Dataset, cfg: &SmoteConfig) -> Result<Dataset, SmoteError> {
    if cfg.k_neighbors == 0 {
        return Err(SmoteError::BadK);
    }
    if !(cfg.target_ratio > 0.0 && cfg.target_ratio <= 1.0) {
        return Err(SmoteError::BadRatio(cfg.target_ratio));
    }
    let (neg, pos) = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(SmoteError::SingleClass);
    }
    let minority_label = train.minority_label();
    let (minority_count, majority_count) = if minority_label.is_positive() {
        (pos, neg)
    } else {
        (neg, pos)
    };

    let target = round_half_up(cfg.target_ratio * majority_count as f64);
    let n_synth = target.saturating_sub(minority_count);
    if n_synth == 0 {
        return Ok(train.clone());
    }
    if minority_count < 2 {
        return Err(SmoteError::InsufficientMinority(minority_count));
    }

    let k = if cfg.k_neighbors > minority_count - 1 {
        log::warn!(
            "k_neighbors {} exceeds minority size - 1, clamping to {}",
            cfg.k_neighbors,
            minority_count - 1
        );
        minority_count - 1
    } else {
        cfg.k_neighbors
    };

    let minority_rows: Vec<usize> = train
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == minority_label)
        .map(|(i, _)| i)
        .collect();
    let x = train.samples();
    let d = train.dim();

    // k nearest minority neighbors per minority sample, distance ties broken
    // by lower row index (the sort key is exactly (distance, index)).
    let neighbors: Vec<Vec<usize>> = minority_rows
        .par_iter()
        .map(|&i| {
            let xi = x.row(i);
            let mut dists: Vec<(f64, usize)> = minority_rows
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let xj = x.row(j);
                    let d2 = xi
                        .iter()
                        .zip(xj.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d2, j)
                })
                .collect();
            dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.truncate(k);
            dists.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_out = train.len() + n_synth;
    let mut samples = Array2::zeros((n_out, d));
    for (row, src) in x.rows().into_iter().enumerate() {
        samples.row_mut(row).assign(&src);
    }
    let mut labels = train.labels().to_vec();

    for s in 0..n_synth {
        let donor_pos = s % minority_count;
        let donor = minority_rows[donor_pos];
        let nn = neighbors[donor_pos][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let out = train.len() + s;
        for col in 0..d {
            let a = x[[donor, col]];
            let b = x[[nn, col]];
            samples[[out, col]] = a + u * (b - a);
        }
        labels.push(minority_label);
    }

    Ok(Dataset::new(
        samples,
        labels,
        train.feature_names().map(<[String]>::to_vec),
    )
    .expect("interpolation of finite rows stays finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Label};
    use ndarray::array;

    fn two_class(majority: usize, minority: usize) -> Dataset {
        let n = majority + minority;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let mut labels = vec![Label::Neg; majority];
        labels.extend(std::iter::repeat_n(Label::Pos, minority));
        Dataset::new(samples, labels, None).unwrap()
    }

    #[test]
    fn balances_600_100_to_600_600() {
        let train = two_class(600, 100);
        let out = smote_oversample(&train, &SmoteConfig::default()).unwrap();
        let (neg, pos) = out.class_counts();
        assert_eq!((neg, pos), (600, 600));
    }

    #[test]
    fn pair_interpolation_stays_on_segment() {
        // Minority {(0,0), (1,1)} with k = 1: every synthetic point has
        // equal coordinates in [0, 1).
        let samples = array![
            [5.0, 7.0],
            [6.0, 2.0],
            [9.0, 9.0],
            [4.0, 4.0],
            [0.0, 0.0],
            [1.0, 1.0]
        ];
        let labels = vec![
            Label::Neg,
            Label::Neg,
            Label::Neg,
            Label::Neg,
            Label::Pos,
            Label::Pos,
        ];
        let train = Dataset::new(samples, labels, None).unwrap();
        let cfg = SmoteConfig {
            k_neighbors: 1,
            ..SmoteConfig::default()
        };
        let out = smote_oversample(&train, &cfg).unwrap();
        assert_eq!(out.len(), 8);
        for row in 4..6 {
            // Originals kept verbatim.
            assert_eq!(out.samples().row(row), train.samples().row(row));
        }
        for row in 6..8 {
            let x = out.samples()[[row, 0]];
            let y = out.samples()[[row, 1]];
            assert_eq!(x, y);
            assert!((0.0..1.0).contains(&x));
            assert_eq!(out.labels()[row], Label::Pos);
        }
    }

    #[test]
    fn single_minority_sample_errors() {
        let train = two_class(10, 1);
        assert!(matches!(
            smote_oversample(&train, &SmoteConfig::default()),
            Err(SmoteError::InsufficientMinority(1))
        ));
    }

    #[test]
    fn single_class_errors() {
        let samples = array![[0.0], [1.0]];
        let train = Dataset::new(samples, vec![Label::Neg, Label::Neg], None).unwrap();
        assert!(matches!(
            smote_oversample(&train, &SmoteConfig::default()),
            Err(SmoteError::SingleClass)
        ));
    }

    #[test]
    fn already_balanced_is_identity() {
        let train = two_class(50, 50);
        let out = smote_oversample(&train, &SmoteConfig::default()).unwrap();
        assert_eq!(out, train);
    }

    #[test]
    fn partial_target_ratio() {
        let train = two_class(200, 40);
        let cfg = SmoteConfig {
            target_ratio: 0.5,
            ..SmoteConfig::default()
        };
        let out = smote_oversample(&train, &cfg).unwrap();
        let (neg, pos) = out.class_counts();
        assert_eq!(neg, 200);
        assert!((pos as f64 - 0.5 * 200.0).abs() <= 1.0);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let train = generate_synthetic(150, 4, 0.2, 2.0, 3).unwrap();
        let cfg = SmoteConfig::default();
        let a = smote_oversample(&train, &cfg).unwrap();
        let b = smote_oversample(&train, &cfg).unwrap();
        assert_eq!(a, b);
        let c = smote_oversample(
            &train,
            &SmoteConfig {
                seed: 1,
                ..SmoteConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_points_lie_on_minority_segments() {
        let train = generate_synthetic(120, 3, 0.25, 2.0, 8).unwrap();
        let out = smote_oversample(&train, &SmoteConfig::default()).unwrap();
        let minority: Vec<usize> = train
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_positive())
            .map(|(i, _)| i)
            .collect();
        for row in train.len()..out.len() {
            let p = out.samples().row(row);
            let on_some_segment = minority.iter().any(|&a| {
                minority.iter().any(|&b| {
                    if a == b {
                        return false;
                    }
                    let pa = train.samples().row(a);
                    let pb = train.samples().row(b);
                    // p = pa + u (pb - pa) for a single u across coordinates.
                    let mut u: Option<f64> = None;
                    for k in 0..p.len() {
                        let span = pb[k] - pa[k];
                        let off = p[k] - pa[k];
                        if span.abs() < 1e-12 {
                            if off.abs() > 1e-9 {
                                return false;
                            }
                        } else {
                            let uk = off / span;
                            match u {
                                None => u = Some(uk),
                                Some(prev) if (prev - uk).abs() > 1e-9 => return false,
                                _ => {}
                            }
                        }
                    }
                    u.is_none_or(|u| (-1e-9..1.0 + 1e-9).contains(&u))
                })
            });
            assert!(on_some_segment, "row {row} not on any minority segment");
        }
    }
}
