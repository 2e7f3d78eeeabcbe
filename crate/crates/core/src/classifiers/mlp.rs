//! Single-hidden-layer perceptron: ReLU hidden units, sigmoid output,
//! trained full-batch with Adam on the L2-penalized log-loss
//! `mean_i bce(p_i, y_i) + alpha / (2 n) * (||W1||^2 + ||W2||^2)`
//! (biases unpenalized). Labels enter as 0/1; the score is the sigmoid
//! output, thresholded at 0.5.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

use super::ClassifierError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_units: usize,
    /// L2 penalty strength.
    pub alpha: f64,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_units: 100,
            alpha: 1.0,
            max_epochs: 1000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpModel {
    /// d x h input-to-hidden weights.
    pub w1: Array2<f64>,
    /// h hidden biases.
    pub b1: Array1<f64>,
    /// h hidden-to-output weights.
    pub w2: Array1<f64>,
    /// Output bias.
    pub b2: f64,
}

/// Gradients of the penalized loss, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable `ln(1 + e^t)`.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, seeded.
    pub fn init(dim: usize, hidden_units: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |limit: f64| rng.random::<f64>() * 2.0 * limit - limit;
        let limit1 = (6.0 / (dim + hidden_units) as f64).sqrt();
        let w1 = Array2::from_shape_fn((dim, hidden_units), |_| uniform(limit1));
        let limit2 = (6.0 / (hidden_units + 1) as f64).sqrt();
        let w2 = Array1::from_shape_fn(hidden_units, |_| uniform(limit2));
        Self {
            w1,
            b1: Array1::zeros(hidden_units),
            w2,
            b2: 0.0,
        }
    }

    /// Pre-activation outputs `z2` for each row of `x`.
    fn forward(&self, x: &ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let mut z1 = x.dot(&self.w1);
        z1 += &self.b1;
        let a1 = z1.mapv(|v| v.max(0.0));
        let z2 = a1.dot(&self.w2) + self.b2;
        (z1, a1, z2)
    }

    /// Sigmoid outputs, one per row.
    pub fn scores(&self, x: &ArrayView2<f64>) -> Vec<f64> {
        let (_, _, z2) = self.forward(x);
        z2.iter().map(|&z| sigmoid(z)).collect()
    }

    /// Penalized log-loss against 0/1 targets.
    pub fn loss(&self, x: &ArrayView2<f64>, y01: &[f64], alpha: f64) -> f64 {
        let n = y01.len() as f64;
        let (_, _, z2) = self.forward(x);
        let bce: f64 = z2
            .iter()
            .zip(y01)
            .map(|(&z, &y)| y * softplus(-z) + (1.0 - y) * softplus(z))
            .sum::<f64>()
            / n;
        let penalty = (self.w1.iter().map(|w| w * w).sum::<f64>()
            + self.w2.iter().map(|w| w * w).sum::<f64>())
            * alpha
            / (2.0 * n);
        bce + penalty
    }

    /// Analytic gradients of [`MlpModel::loss`] by backpropagation.
    pub fn gradients(&self, x: &ArrayView2<f64>, y01: &[f64], alpha: f64) -> MlpGradients {
        let n = y01.len() as f64;
        let (z1, a1, z2) = self.forward(x);

        let dz2 = Array1::from_iter(z2.iter().zip(y01).map(|(&z, &y)| (sigmoid(z) - y) / n));
        let g_w2 = a1.t().dot(&dz2) + &(&self.w2 * (alpha / n));
        let g_b2 = dz2.sum();

        let da1 = dz2
            .view()
            .insert_axis(Axis(1))
            .dot(&self.w2.view().insert_axis(Axis(0)));
        let dz1 = &da1 * &z1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let g_w1 = x.t().dot(&dz1) + &(&self.w1 * (alpha / n));
        let g_b1 = dz1.sum_axis(Axis(0));

        MlpGradients {
            w1: g_w1,
            b1: g_b1,
            w2: g_w2,
            b2: g_b2,
        }
    }
}

/// First/second moment estimates for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: usize,
    m_w1: Array2<f64>,
    v_w1: Array2<f64>,
    m_b1: Array1<f64>,
    v_b1: Array1<f64>,
    m_w2: Array1<f64>,
    v_w2: Array1<f64>,
    m_b2: f64,
    v_b2: f64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        Self {
            t: 0,
            m_w1: Array2::zeros(model.w1.dim()),
            v_w1: Array2::zeros(model.w1.dim()),
            m_b1: Array1::zeros(model.b1.len()),
            v_b1: Array1::zeros(model.b1.len()),
            m_w2: Array1::zeros(model.w2.len()),
            v_w2: Array1::zeros(model.w2.len()),
            m_b2: 0.0,
            v_b2: 0.0,
        }
    }
}

fn adam_update<'a, I, G>(params: I, grads: G, m: I, v: I, state_t: usize, cfg: &MlpParams)
where
    I: IntoIterator<Item = &'a mut f64>,
    G: IntoIterator<Item = f64>,
{
    let bias1 = 1.0 - cfg.beta1.powi(state_t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(state_t as i32);
    for (((p, g), m), v) in params.into_iter().zip(grads).zip(m).zip(v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One full-batch Adam update on the penalized log-loss; returns the loss at
/// the pre-step parameters.
pub fn backprop_step(
    model: &mut MlpModel,
    state: &mut AdamState,
    cfg: &MlpParams,
    x: &ArrayView2<f64>,
    y01: &[f64],
) -> f64 {
    let loss = model.loss(x, y01, cfg.alpha);
    let grads = model.gradients(x, y01, cfg.alpha);
    state.t += 1;
    let t = state.t;
    adam_update(
        model.w1.iter_mut(),
        grads.w1.iter().copied(),
        state.m_w1.iter_mut(),
        state.v_w1.iter_mut(),
        t,
        cfg,
    );
    adam_update(
        model.b1.iter_mut(),
        grads.b1.iter().copied(),
        state.m_b1.iter_mut(),
        state.v_b1.iter_mut(),
        t,
        cfg,
    );
    adam_update(
        model.w2.iter_mut(),
        grads.w2.iter().copied(),
        state.m_w2.iter_mut(),
        state.v_w2.iter_mut(),
        t,
        cfg,
    );
    adam_update(
        std::iter::once(&mut model.b2),
        std::iter::once(grads.b2),
        std::iter::once(&mut state.m_b2),
        std::iter::once(&mut state.v_b2),
        t,
        cfg,
    );
    loss
}

/// Trains for the full epoch budget; `converged` is false only if the loss
/// or a weight went non-finite.
pub(crate) fn fit(
    params: &MlpParams,
    train: &Dataset,
) -> Result<(MlpModel, bool), ClassifierError> {
    if params.hidden_units == 0 || params.max_epochs == 0 {
        return Err(ClassifierError::InvalidParameter(
            "hidden_units and max_epochs must be >= 1".into(),
        ));
    }
    let y01: Vec<f64> = train
        .labels()
        .iter()
        .map(|l| if l.is_positive() { 1.0 } else { 0.0 })
        .collect();
    let x = train.samples().view();
    let mut model = MlpModel::init(train.dim(), params.hidden_units, params.seed);
    let mut state = AdamState::new(&model);
    let mut last_loss = f64::INFINITY;
    for _ in 0..params.max_epochs {
        last_loss = backprop_step(&mut model, &mut state, params, &x, &y01);
    }
    let finite = last_loss.is_finite()
        && model.w1.iter().all(|v| v.is_finite())
        && model.w2.iter().all(|v| v.is_finite())
        && model.b1.iter().all(|v| v.is_finite())
        && model.b2.is_finite();
    Ok((model, finite))
}

#[cfg(test)]
mod tests {
    use super::super::test_util::{training_accuracy, two_clusters};
    use super::super::{fit as fit_spec, ClassifierSpec};
    use super::*;
    use ndarray::array;
    use rand::Rng;

    /// Central finite differences over every parameter of the model.
    fn fd_gradients(
        model: &MlpModel,
        x: &ArrayView2<f64>,
        y01: &[f64],
        alpha: f64,
        h: f64,
    ) -> MlpGradients {
        let mut m = model.clone();
        let mut grad = MlpGradients {
            w1: Array2::zeros(model.w1.dim()),
            b1: Array1::zeros(model.b1.len()),
            w2: Array1::zeros(model.w2.len()),
            b2: 0.0,
        };
        let probe = |m: &mut MlpModel, get: &dyn Fn(&mut MlpModel) -> &mut f64| -> f64 {
            let orig = *get(m);
            *get(m) = orig + h;
            let hi = m.loss(x, y01, alpha);
            *get(m) = orig - h;
            let lo = m.loss(x, y01, alpha);
            *get(m) = orig;
            (hi - lo) / (2.0 * h)
        };
        for idx in 0..model.w1.len() {
            let (r, c) = (idx / model.w1.ncols(), idx % model.w1.ncols());
            grad.w1[[r, c]] = probe(&mut m, &move |m| &mut m.w1[[r, c]]);
        }
        for i in 0..model.b1.len() {
            grad.b1[i] = probe(&mut m, &move |m| &mut m.b1[i]);
        }
        for i in 0..model.w2.len() {
            grad.w2[i] = probe(&mut m, &move |m| &mut m.w2[i]);
        }
        grad.b2 = probe(&mut m, &|m| &mut m.b2);
        grad
    }

    fn assert_close(analytic: &[f64], numeric: &[f64]) {
        let scale = numeric
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
            .max(1e-8);
        for (a, n) in analytic.iter().zip(numeric) {
            assert!(
                (a - n).abs() <= 1e-4 * scale,
                "gradient mismatch: analytic {a}, numeric {n}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_tiny_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = Array2::from_shape_fn((12, 4), |_| rng.random::<f64>() * 2.0 - 1.0);
        let y01: Vec<f64> = (0..12).map(|i| f64::from(i % 2 == 0)).collect();
        let model = MlpModel::init(4, 3, 5);
        let alpha = 1.0;
        let analytic = model.gradients(&x.view(), &y01, alpha);
        let numeric = fd_gradients(&model, &x.view(), &y01, alpha, 1e-6);
        assert_close(
            analytic.w1.as_slice().unwrap(),
            numeric.w1.as_slice().unwrap(),
        );
        assert_close(
            analytic.b1.as_slice().unwrap(),
            numeric.b1.as_slice().unwrap(),
        );
        assert_close(
            analytic.w2.as_slice().unwrap(),
            numeric.w2.as_slice().unwrap(),
        );
        assert_close(&[analytic.b2], &[numeric.b2]);
    }

    #[test]
    fn zero_weight_network_has_zero_weight_gradients() {
        let mut model = MlpModel::init(2, 4, 0);
        model.w1.fill(0.0);
        model.w2.fill(0.0);
        let x = array![[1.0, -1.0], [-1.0, 1.0]];
        let y01 = [1.0, 0.0];
        let grads = model.gradients(&x.view(), &y01, 1.0);
        assert!(grads.w1.iter().all(|&g| g == 0.0));
        assert!(grads.w2.iter().all(|&g| g == 0.0));
        // Output bias still sees mean(p - y) = mean(0.5 - y) = 0 here.
        assert_eq!(grads.b2, 0.0);
    }

    #[test]
    fn zero_alpha_drops_penalty_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((8, 3), |_| rng.random::<f64>());
        let y01: Vec<f64> = (0..8).map(|i| f64::from(i % 3 == 0)).collect();
        let model = MlpModel::init(3, 4, 9);
        let g0 = model.gradients(&x.view(), &y01, 0.0);
        let g1 = model.gradients(&x.view(), &y01, 1.0);
        let n = y01.len() as f64;
        for ((a, b), w) in g0.w1.iter().zip(g1.w1.iter()).zip(model.w1.iter()) {
            assert!((b - a - w / n).abs() < 1e-12);
        }
    }

    #[test]
    fn learns_xor_with_default_settings() {
        // XOR corners replicated 25x with +-0.05 noise.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let corners = [
            (0.0, 0.0, 0.0),
            (1.0, 1.0, 0.0),
            (0.0, 1.0, 1.0),
            (1.0, 0.0, 1.0),
        ];
        let mut samples = Array2::zeros((100, 2));
        let mut labels = Vec::new();
        for i in 0..100 {
            let (cx, cy, y) = corners[i % 4];
            samples[[i, 0]] = cx + (rng.random::<f64>() - 0.5) * 0.1;
            samples[[i, 1]] = cy + (rng.random::<f64>() - 0.5) * 0.1;
            labels.push(if y > 0.5 {
                crate::data::Label::Pos
            } else {
                crate::data::Label::Neg
            });
        }
        let ds = Dataset::new(samples, labels, None).unwrap();
        let model = fit_spec(
            &ClassifierSpec::Mlp(MlpParams {
                seed: 2,
                ..MlpParams::default()
            }),
            &ds,
        )
        .unwrap();
        let acc = training_accuracy(&model, &ds);
        assert!(acc >= 0.95, "XOR training accuracy {acc}");
    }

    #[test]
    fn fit_is_deterministic() {
        let train = two_clusters(40, 2.0, 8);
        let params = MlpParams {
            max_epochs: 25,
            seed: 4,
            ..MlpParams::default()
        };
        let (a, _) = fit(&params, &train).unwrap();
        let (b, _) = fit(&params, &train).unwrap();
        assert_eq!(a.w1, b.w1);
        assert_eq!(a.w2, b.w2);
        assert_eq!(a.b1, b.b1);
        assert_eq!(a.b2, b.b2);
    }
}
