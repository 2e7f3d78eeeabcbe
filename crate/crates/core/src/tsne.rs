//! Exact t-SNE.
//!
//! High-dimensional similarities are row-wise Gaussians whose bandwidths are
//! calibrated per sample so that the row's effective neighbor count
//! (`2^H`, Shannon entropy in bits) hits the requested perplexity. The joint
//! distribution is the symmetrized conditional, `p_ij = (p_{i|j} + p_{j|i}) / (2n)`.
//! The map-space distribution uses the Student-t kernel with one degree of
//! freedom, `1 / (1 + ||y_i - y_j||^2)`, normalized over all off-diagonal
//! pairs. The embedding minimizes `KL(P || Q)` by momentum gradient descent
//! with early exaggeration.
//!
//! Everything here is the exact `O(n^2)` algorithm; there is no tree
//! approximation. Row-level work is parallelized with `rayon`, with all
//! reductions performed in index order so results are bitwise reproducible
//! for a fixed seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Label};
use crate::seeding::derive_seed;

/// Floor applied to q entries inside logarithms.
const Q_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TsneError {
    #[error("{}", match row { Some(r) => format!("all neighbor distances are zero for sample {r}"), None => "all neighbor distances are zero".to_string() })]
    DegenerateRow { row: Option<usize> },
    #[error("coordinates became non-finite at iteration {iteration} (learning rate too high?)")]
    NonFinite { iteration: usize },
    #[error("perplexity {perplexity} outside [2, n-1] for n={n}")]
    InvalidPerplexity { perplexity: f64, n: usize },
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hyperparameters of one t-SNE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration_factor: f64,
    pub exaggeration_iters: usize,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub init_stddev: f64,
    pub seed: u64,
    pub calibration_tolerance: f64,
    pub calibration_max_steps: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration_factor: 12.0,
            exaggeration_iters: 250,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            init_stddev: 1e-4,
            seed: 0,
            calibration_tolerance: 1e-5,
            calibration_max_steps: 64,
        }
    }
}

impl TsneConfig {
    fn validate(&self, n: usize) -> Result<(), TsneError> {
        if n < 3 {
            return Err(TsneError::TooFewSamples { n, min: 3 });
        }
        if !(self.perplexity >= 2.0 && self.perplexity <= (n - 1) as f64) {
            return Err(TsneError::InvalidPerplexity {
                perplexity: self.perplexity,
                n,
            });
        }
        if self.iterations == 0 {
            return Err(TsneError::InvalidConfig("iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("early_exaggeration_factor", self.early_exaggeration_factor),
            ("init_stddev", self.init_stddev),
            ("calibration_tolerance", self.calibration_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TsneError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Row-normalized Gaussian conditionals `p_{j|i}` with their bandwidths.
#[derive(Debug, Clone)]
pub struct ConditionalAffinities {
    p_cond: Array2<f64>,
    sigmas: Vec<f64>,
    /// Rows whose bandwidth search hit the step limit before reaching the
    /// perplexity tolerance (best effort values are still used).
    unconverged_rows: Vec<usize>,
}

impl ConditionalAffinities {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.p_cond
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn unconverged_rows(&self) -> &[usize] {
        &self.unconverged_rows
    }

    pub fn n(&self) -> usize {
        self.p_cond.nrows()
    }
}

/// Symmetric joint similarity distribution over sample pairs.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    p: Array2<f64>,
}

impl AffinityMatrix {
    /// Validates symmetry, zero diagonal, non-negativity, and unit total sum.
    pub fn new(p: Array2<f64>) -> Result<Self, TsneError> {
        if p.nrows() != p.ncols() {
            return Err(TsneError::InvalidConfig(format!(
                "affinity matrix must be square, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        let n = p.nrows();
        let mut total = 0.0;
        for i in 0..n {
            if p[[i, i]] != 0.0 {
                return Err(TsneError::InvalidConfig("nonzero diagonal".into()));
            }
            for j in 0..n {
                let v = p[[i, j]];
                if v < 0.0 || !v.is_finite() {
                    return Err(TsneError::InvalidConfig(
                        "negative or non-finite entry".into(),
                    ));
                }
                if (v - p[[j, i]]).abs() > 1e-10 {
                    return Err(TsneError::InvalidConfig("asymmetric entry".into()));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(TsneError::InvalidConfig(format!("total sum {total} != 1")));
        }
        Ok(Self { p })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }
}

/// A finished 2-D embedding with its KL trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding {
    /// `n x 2` map coordinates.
    pub points: Array2<f64>,
    /// KL divergence of the final points against the (un-exaggerated) P.
    pub final_kl: f64,
    /// KL per iteration against the un-exaggerated P: entry `t` is the value
    /// after `t` update steps, so there are `iterations + 1` entries and the
    /// last equals `final_kl`.
    pub history: Vec<f64>,
}

/// One calibrated row: bandwidth, Gaussian probabilities over the other
/// samples, and whether the search met the tolerance.
#[derive(Debug, Clone)]
pub struct SigmaFit {
    pub sigma: f64,
    pub probs: Vec<f64>,
    pub converged: bool,
}

/// Entropy (bits) and probabilities of a Gaussian row at precision
/// `beta = 1 / (2 sigma^2)`, computed with the max-shift trick.
fn row_entropy_bits(sq_distances: &[f64], beta: f64, probs: &mut [f64]) -> f64 {
    let min_d = sq_distances.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (p, &d) in probs.iter_mut().zip(sq_distances) {
        let e = (-beta * (d - min_d)).exp();
        *p = e;
        sum += e;
    }
    let mut entropy_nats = 0.0;
    for (p, &d) in probs.iter_mut().zip(sq_distances) {
        *p /= sum;
        entropy_nats += *p * beta * (d - min_d);
    }
    entropy_nats += sum.ln();
    entropy_nats / std::f64::consts::LN_2
}

/// Finds the Gaussian bandwidth whose row entropy matches the target
/// perplexity: bisection on log sigma until `|2^H - perplexity| <= tol` or
/// `max_steps` bisection steps are spent (best sigma returned either way,
/// flagged via `converged`).
pub fn calibrate_sigma(
    sq_distances: &[f64],
    perplexity: f64,
    tol: f64,
    max_steps: usize,
) -> Result<SigmaFit, TsneError> {
    if sq_distances.is_empty() || sq_distances.iter().all(|&d| d == 0.0) {
        return Err(TsneError::DegenerateRow { row: None });
    }
    if !(perplexity > 1.0 && perplexity <= sq_distances.len() as f64) {
        return Err(TsneError::InvalidPerplexity {
            perplexity,
            n: sq_distances.len() + 1,
        });
    }

    let target_bits = perplexity.log2();
    let mut probs = vec![0.0; sq_distances.len()];
    let eval = |sigma: f64, probs: &mut [f64]| -> f64 {
        let beta = 1.0 / (2.0 * sigma * sigma);
        row_entropy_bits(sq_distances, beta, probs)
    };

    // Bracket the target in log space, doubling/halving from sigma = 1.
    let mut lo = 1.0_f64;
    let mut hi = 1.0_f64;
    let mut h = eval(1.0, &mut probs);
    if h < target_bits {
        for _ in 0..128 {
            hi *= 2.0;
            h = eval(hi, &mut probs);
            if h >= target_bits {
                break;
            }
        }
    } else {
        for _ in 0..128 {
            lo /= 2.0;
            h = eval(lo, &mut probs);
            if h <= target_bits {
                break;
            }
        }
    }

    let mut best_sigma = if h < target_bits { hi } else { lo };
    let mut best_err = (h.exp2() - perplexity).abs();
    let mut converged = best_err <= tol;
    if !converged {
        for _ in 0..max_steps {
            let mid = (lo.ln() + hi.ln()).mul_add(0.5, 0.0).exp();
            let h = eval(mid, &mut probs);
            let err = (h.exp2() - perplexity).abs();
            if err < best_err {
                best_err = err;
                best_sigma = mid;
            }
            if err <= tol {
                converged = true;
                break;
            }
            if h < target_bits {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    // Recompute probabilities at the returned sigma.
    eval(best_sigma, &mut probs);
    Ok(SigmaFit {
        sigma: best_sigma,
        probs,
        converged,
    })
}

/// Pairwise squared Euclidean distances via the expanded Gram form,
/// clamped at zero against cancellation.
fn squared_distances(x: &ArrayView2<f64>) -> Array2<f64> {
    let gram = x.dot(&x.t());
    let n = x.nrows();
    let sq_norms: Vec<f64> = (0..n).map(|i| gram[[i, i]]).collect();
    let mut d2 = Array2::zeros((n, n));
    d2.axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in 0..n {
                if i != j {
                    row[j] = (sq_norms[i] + sq_norms[j] - 2.0 * gram[[i, j]]).max(0.0);
                }
            }
        });
    d2
}

/// Calibrated Gaussian conditionals for every sample, rows in parallel.
pub fn conditional_affinities(
    x: &ArrayView2<f64>,
    cfg: &TsneConfig,
) -> Result<ConditionalAffinities, TsneError> {
    let n = x.nrows();
    cfg.validate(n)?;
    let d2 = squared_distances(x);

    let fits: Vec<Result<SigmaFit, TsneError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(n - 1);
            for j in 0..n {
                if j != i {
                    row.push(d2[[i, j]]);
                }
            }
            calibrate_sigma(
                &row,
                cfg.perplexity,
                cfg.calibration_tolerance,
                cfg.calibration_max_steps,
            )
            .map_err(|e| match e {
                TsneError::DegenerateRow { .. } => TsneError::DegenerateRow { row: Some(i) },
                other => other,
            })
        })
        .collect();

    let mut p_cond = Array2::zeros((n, n));
    let mut sigmas = Vec::with_capacity(n);
    let mut unconverged_rows = Vec::new();
    for (i, fit) in fits.into_iter().enumerate() {
        let fit = fit?;
        let mut k = 0;
        for j in 0..n {
            if j != i {
                p_cond[[i, j]] = fit.probs[k];
                k += 1;
            }
        }
        sigmas.push(fit.sigma);
        if !fit.converged {
            unconverged_rows.push(i);
        }
    }
    if !unconverged_rows.is_empty() {
        log::warn!(
            "sigma calibration missed tolerance on {} of {n} rows",
            unconverged_rows.len()
        );
    }
    Ok(ConditionalAffinities {
        p_cond,
        sigmas,
        unconverged_rows,
    })
}

/// Joint similarities `p_ij = (p_{i|j} + p_{j|i}) / (2n)`.
pub fn symmetrize(cond: &ConditionalAffinities) -> AffinityMatrix {
    let n = cond.n();
    let pc = &cond.p_cond;
    let mut p = Array2::zeros((n, n));
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[[i, j]] = (pc[[i, j]] + pc[[j, i]]) * scale;
        }
    }
    AffinityMatrix { p }
}

/// Map-space similarities: Student-t kernel `1 / (1 + ||y_i - y_j||^2)` off
/// the diagonal and zero on it, plus its normalization `q = kernel / sum`.
///
/// Returns `(q, kernel)`.
pub fn low_dim_affinities(y: &ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let n = y.nrows();
    assert!(n >= 2, "need at least two map points");
    let mut kernel = Array2::zeros((n, n));
    let row_sums: Vec<f64> = kernel
        .axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let yi0 = y[[i, 0]];
            let yi1 = y[[i, 1]];
            let mut sum = 0.0;
            for j in 0..n {
                if i != j {
                    let dx = yi0 - y[[j, 0]];
                    let dy = yi1 - y[[j, 1]];
                    let k = 1.0 / (1.0 + dx * dx + dy * dy);
                    row[j] = k;
                    sum += k;
                }
            }
            sum
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    let q = kernel.mapv(|k| k / total);
    (q, kernel)
}

/// `KL(P || q) = sum_{i != j} p log(p / q)` with `0 log 0 = 0` and q floored
/// at 1e-12 inside the logarithm.
pub fn kl_divergence(p: &ArrayView2<f64>, q: &ArrayView2<f64>) -> f64 {
    debug_assert_eq!(p.dim(), q.dim());
    let n = p.nrows();
    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if i != j {
                    let pij = p[[i, j]];
                    if pij > 0.0 {
                        acc += pij * (pij / q[[i, j]].max(Q_FLOOR)).ln();
                    }
                }
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

/// KL gradient w.r.t. the map points under the Student-t kernel:
/// `grad_i = 4 sum_j (p_ij - q_ij) kernel_ij (y_i - y_j)`.
pub fn tsne_gradient(
    p: &ArrayView2<f64>,
    q: &ArrayView2<f64>,
    kernel: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
) -> Array2<f64> {
    scaled_gradient(p, 1.0, q, kernel, y)
}

/// Gradient with P scaled by `p_scale`, used for the exaggeration phase
/// without materializing an exaggerated copy of P.
fn scaled_gradient(
    p: &ArrayView2<f64>,
    p_scale: f64,
    q: &ArrayView2<f64>,
    kernel: &ArrayView2<f64>,
    y: &ArrayView2<f64>,
) -> Array2<f64> {
    let n = y.nrows();
    let mut grad = Array2::zeros((n, 2));
    grad.axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut g)| {
            let yi0 = y[[i, 0]];
            let yi1 = y[[i, 1]];
            let mut g0 = 0.0;
            let mut g1 = 0.0;
            for j in 0..n {
                if i != j {
                    let w = 4.0 * (p_scale * p[[i, j]] - q[[i, j]]) * kernel[[i, j]];
                    g0 += w * (yi0 - y[[j, 0]]);
                    g1 += w * (yi1 - y[[j, 1]]);
                }
            }
            g[0] = g0;
            g[1] = g1;
        });
    grad
}

/// Runs the full t-SNE optimization and returns the embedding with its KL
/// trace. Deterministic for a fixed config (including seed).
pub fn run_tsne(x: &ArrayView2<f64>, cfg: &TsneConfig) -> Result<Embedding, TsneError> {
    let n = x.nrows();
    cfg.validate(n)?;
    let p = symmetrize(&conditional_affinities(x, cfg)?);
    run_with_affinities(&p, cfg)
}

/// Optimization loop against a precomputed affinity matrix.
pub fn run_with_affinities(p: &AffinityMatrix, cfg: &TsneConfig) -> Result<Embedding, TsneError> {
    let n = p.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = StandardNormal;
    let mut y = Array2::zeros((n, 2));
    for v in y.iter_mut() {
        let draw: f64 = normal.sample(&mut rng);
        *v = draw * cfg.init_stddev;
    }

    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    let p_view = p.matrix().view();

    for iter in 0..cfg.iterations {
        let (q, kernel) = low_dim_affinities(&y.view());
        history.push(kl_divergence(&p_view, &q.view()));

        let p_scale = if iter < cfg.exaggeration_iters {
            cfg.early_exaggeration_factor
        } else {
            1.0
        };
        let grad = scaled_gradient(&p_view, p_scale, &q.view(), &kernel.view(), &y.view());

        let momentum = if iter < cfg.momentum_switch_iter {
            cfg.momentum_initial
        } else {
            cfg.momentum_final
        };
        for (v, g) in velocity.iter_mut().zip(grad.iter()) {
            *v = momentum * *v - cfg.learning_rate * *g;
        }
        y += &velocity;

        if y.iter().any(|v| !v.is_finite()) {
            return Err(TsneError::NonFinite { iteration: iter });
        }
    }

    let (q, _) = low_dim_affinities(&y.view());
    let final_kl = kl_divergence(&p_view, &q.view());
    history.push(final_kl);

    Ok(Embedding {
        points: y,
        final_kl,
        history,
    })
}

/// One embedding per perplexity value, with a distinct seed derived per run.
pub fn perplexity_sweep(
    x: &ArrayView2<f64>,
    cfg: &TsneConfig,
    values: &[f64],
) -> Result<Vec<Embedding>, TsneError> {
    let n = x.nrows();
    for &v in values {
        if !(v >= 2.0 && v <= (n.max(1) - 1) as f64) {
            return Err(TsneError::InvalidPerplexity { perplexity: v, n });
        }
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &perplexity)| {
            let run_cfg = TsneConfig {
                perplexity,
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            run_tsne(x, &run_cfg)
        })
        .collect()
}

/// Writes an embedding as a CSV with columns `x,y,label`.
pub fn write_embedding_csv(
    points: &ArrayView2<f64>,
    labels: &[Label],
    path: &Path,
) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x,y,label")?;
    for (row, label) in points.rows().into_iter().zip(labels) {
        writeln!(w, "{},{},{label}", row[0], row[1])?;
    }
    w.flush()?;
    Ok(())
}
