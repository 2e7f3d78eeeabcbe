//! RBF-kernel support vector machine trained with simplified SMO.
//!
//! The solver repeatedly sweeps the training set looking for KKT violations
//! at tolerance `tol`, pairing each violating multiplier with a random
//! partner and solving the two-variable subproblem analytically. A cached
//! error vector is updated incrementally after every accepted step, so clean
//! sweeps cost `O(n)`. Training ends after `max_passes` consecutive clean
//! sweeps (converged) or a hard sweep cap (best effort, flagged).
//!
//! The pair update preserves `sum(alpha_i y_i) = 0` and clips both
//! multipliers into `[0, C]`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};

use super::ClassifierError;

/// Full kernel matrices are cached up to this many training rows (~134 MB);
/// beyond that, rows are recomputed on demand.
const KERNEL_CACHE_MAX: usize = 4096;

/// Hard cap on optimization sweeps.
const SWEEP_CAP: usize = 10_000;

/// Minimum multiplier change for a pair step to count.
const MIN_ALPHA_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmRbfParams {
    /// RBF kernel width in `exp(-gamma ||a - b||^2)`; must be positive.
    pub gamma: f64,
    /// Box constraint on the dual variables.
    pub c: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Consecutive clean sweeps required to declare convergence.
    pub max_passes: usize,
    /// Seed for the random partner choice.
    pub seed: u64,
}

impl Default for SvmRbfParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            c: 1.0,
            tol: 1e-3,
            max_passes: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub bias: f64,
    /// Dual coefficients for every training row, in `[0, C]`.
    pub alpha: Vec<f64>,
    /// Training labels, aligned with `alpha`.
    pub labels: Vec<Label>,
    /// Rows with `alpha > 0`.
    support_x: Array2<f64>,
    /// `alpha_i * y_i` for each support row.
    support_coef: Vec<f64>,
}

fn rbf(a: ArrayView1<f64>, b: ArrayView1<f64>, gamma: f64) -> f64 {
    let d2 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>();
    (-gamma * d2).exp()
}

/// Kernel values against all training rows, cached or recomputed.
enum KernelSource<'a> {
    Cached(Array2<f64>),
    OnDemand { x: &'a Array2<f64>, gamma: f64 },
}

impl KernelSource<'_> {
    fn row(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        match self {
            KernelSource::Cached(k) => buf.extend(k.row(i).iter()),
            KernelSource::OnDemand { x, gamma } => {
                let xi = x.row(i);
                buf.extend(x.rows().into_iter().map(|xj| rbf(xi, xj, *gamma)));
            }
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        match self {
            KernelSource::Cached(k) => k[[i, j]],
            KernelSource::OnDemand { x, gamma } => rbf(x.row(i), x.row(j), *gamma),
        }
    }
}

impl SvmModel {
    /// Runs SMO; returns the model and whether it converged.
    pub(crate) fn fit(
        params: &SvmRbfParams,
        train: &Dataset,
    ) -> Result<(Self, bool), ClassifierError> {
        if !params.gamma.is_finite() || params.gamma <= 0.0 {
            return Err(ClassifierError::InvalidParameter(
                "gamma must be greater than 0".into(),
            ));
        }
        if !params.c.is_finite() || params.c <= 0.0 {
            return Err(ClassifierError::InvalidParameter("C must be > 0".into()));
        }
        let n = train.len();
        let x = train.samples();
        let y: Vec<f64> = train.labels().iter().map(|l| l.as_f64()).collect();

        let kernel = if n <= KERNEL_CACHE_MAX {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let xi = x.row(i);
                    (0..n).map(|j| rbf(xi, x.row(j), params.gamma)).collect()
                })
                .collect();
            let mut k = Array2::zeros((n, n));
            for (i, row) in rows.into_iter().enumerate() {
                for (j, v) in row.into_iter().enumerate() {
                    k[[i, j]] = v;
                }
            }
            KernelSource::Cached(k)
        } else {
            KernelSource::OnDemand {
                x,
                gamma: params.gamma,
            }
        };

        let c = params.c;
        let tol = params.tol;
        let mut alpha = vec![0.0_f64; n];
        let mut bias = 0.0_f64;
        // Error cache E_k = f(x_k) - y_k; starts at -y since f = 0.
        let mut errors: Vec<f64> = y.iter().map(|&v| -v).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut row_i = Vec::with_capacity(n);
        let mut row_j = Vec::with_capacity(n);

        let mut clean_passes = 0;
        let mut sweeps = 0;
        while clean_passes < params.max_passes && sweeps < SWEEP_CAP {
            let mut changed = 0;
            for i in 0..n {
                let r = y[i] * errors[i];
                let violates = (r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0);
                if !violates {
                    continue;
                }
                let j = loop {
                    let j = rng.random_range(0..n);
                    if j != i {
                        break j;
                    }
                };

                let (lo, hi) = if y[i] != y[j] {
                    (
                        (alpha[j] - alpha[i]).max(0.0),
                        (c + alpha[j] - alpha[i]).min(c),
                    )
                } else {
                    (
                        (alpha[i] + alpha[j] - c).max(0.0),
                        (alpha[i] + alpha[j]).min(c),
                    )
                };
                if lo >= hi {
                    continue;
                }
                let k_ij = kernel.at(i, j);
                // K_ii = K_jj = 1 for the RBF kernel.
                let eta = 2.0 * k_ij - 2.0;
                if eta >= 0.0 {
                    continue;
                }

                let a_j_new = (alpha[j] - y[j] * (errors[i] - errors[j]) / eta).clamp(lo, hi);
                if (a_j_new - alpha[j]).abs() < MIN_ALPHA_STEP {
                    continue;
                }
                let a_i_new = (alpha[i] + y[i] * y[j] * (alpha[j] - a_j_new)).clamp(0.0, c);

                let d_i = a_i_new - alpha[i];
                let d_j = a_j_new - alpha[j];
                let b1 = bias - errors[i] - y[i] * d_i - y[j] * d_j * k_ij;
                let b2 = bias - errors[j] - y[i] * d_i * k_ij - y[j] * d_j;
                let b_new = if a_i_new > 0.0 && a_i_new < c {
                    b1
                } else if a_j_new > 0.0 && a_j_new < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };

                kernel.row(i, &mut row_i);
                kernel.row(j, &mut row_j);
                let d_b = b_new - bias;
                for k in 0..n {
                    errors[k] += y[i] * d_i * row_i[k] + y[j] * d_j * row_j[k] + d_b;
                }

                alpha[i] = a_i_new;
                alpha[j] = a_j_new;
                bias = b_new;
                changed += 1;
            }
            sweeps += 1;
            if changed == 0 {
                clean_passes += 1;
            } else {
                clean_passes = 0;
            }
        }
        let converged = clean_passes >= params.max_passes;

        let support: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
        let mut support_x = Array2::zeros((support.len(), train.dim()));
        let mut support_coef = Vec::with_capacity(support.len());
        for (row, &i) in support.iter().enumerate() {
            support_x.row_mut(row).assign(&x.row(i));
            support_coef.push(alpha[i] * y[i]);
        }

        Ok((
            Self {
                gamma: params.gamma,
                bias,
                alpha,
                labels: train.labels().to_vec(),
                support_x,
                support_coef,
            },
            converged,
        ))
    }

    /// Decision function `sum_i alpha_i y_i K(x_i, q) + b`.
    pub fn decision_function(&self, query: ArrayView1<f64>) -> f64 {
        self.support_x
            .rows()
            .into_iter()
            .zip(&self.support_coef)
            .map(|(sv, coef)| coef * rbf(sv, query, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub(crate) fn scores(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let rows: Vec<_> = x.rows().into_iter().collect();
        rows.par_iter()
            .map(|row| self.decision_function(*row))
            .collect()
    }

    /// `|sum_i alpha_i y_i|`, preserved near zero by the pair updates.
    pub fn kkt_residual(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.labels)
            .map(|(a, l)| a * l.as_f64())
            .sum::<f64>()
            .abs()
    }

    pub fn n_support(&self) -> usize {
        self.support_coef.len()
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::{training_accuracy, two_clusters};
    use super::super::{fit, ClassifierSpec};
    use super::*;

    #[test]
    fn separates_distant_clusters_perfectly() {
        let train = two_clusters(40, 5.0, 7);
        let spec = ClassifierSpec::SvmRbf(SvmRbfParams::default());
        let model = fit(&spec, &train).unwrap();
        assert!(model.converged());
        assert_eq!(training_accuracy(&model, &train), 1.0);
    }

    #[test]
    fn dual_solution_within_box_and_balanced() {
        let params = SvmRbfParams::default();
        let train = two_clusters(60, 2.0, 13);
        let (model, _) = SvmModel::fit(&params, &train).unwrap();
        assert!(model.alpha.iter().all(|&a| (0.0..=params.c).contains(&a)));
        assert!(
            model.kkt_residual() <= 1e-6,
            "residual {}",
            model.kkt_residual()
        );
        assert!(model.n_support() > 0);
    }

    #[test]
    fn overlapping_data_hits_box_bound() {
        // Heavy overlap forces some alpha to the C bound.
        let params = SvmRbfParams::default();
        let train = two_clusters(60, 0.2, 19);
        let (model, _) = SvmModel::fit(&params, &train).unwrap();
        assert!(model.alpha.contains(&params.c));
        assert!(model.kkt_residual() <= 1e-6);
    }

    #[test]
    fn gamma_must_be_positive() {
        let train = two_clusters(10, 2.0, 1);
        let err = SvmModel::fit(
            &SvmRbfParams {
                gamma: 0.0,
                ..SvmRbfParams::default()
            },
            &train,
        );
        assert!(matches!(err, Err(ClassifierError::InvalidParameter(_))));
    }

    #[test]
    fn refit_is_deterministic() {
        let train = two_clusters(50, 1.5, 3);
        let params = SvmRbfParams::default();
        let (a, _) = SvmModel::fit(&params, &train).unwrap();
        let (b, _) = SvmModel::fit(&params, &train).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.bias, b.bias);
    }
}
