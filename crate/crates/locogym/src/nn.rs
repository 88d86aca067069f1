//! Minimal feed-forward networks with hand-written reverse-mode gradients:
//! an MLP, a Gaussian policy head with state-independent log-std, and Adam.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LOG_2PI: f64 = 1.8378770664093453; // ln(2π)

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite loss in {0}")]
    NonFiniteLoss(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Elu,
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    /// Derivative expressed in terms of the pre-activation input.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
        }
    }

    pub fn parse(name: &str) -> Option<Activation> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "elu" => Some(Activation::Elu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// MLP parameters; the activation applies to all hidden layers, the output
/// layer is linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Stored pre-activations from a forward pass, consumed by `backward`.
pub struct MlpTape {
    /// Input plus post-activation output of every layer.
    activations: Vec<DVector<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<DVector<f64>>,
}

/// Gradient accumulator with the exact shape of an `Mlp`.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Orthogonal-ish init: uniform scaled by 1/sqrt(fan_in), zero biases.
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut impl Rng) -> Mlp {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                Layer {
                    weight: DMatrix::from_fn(fan_out, fan_in, |_, _| {
                        rng.gen_range(-scale..scale)
                    }),
                    bias: DVector::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weight.nrows()));
        sizes
    }

    pub fn forward(&self, input: &DVector<f64>) -> Result<DVector<f64>, NnError> {
        Ok(self.forward_tape(input)?.0)
    }

    pub fn forward_tape(&self, input: &DVector<f64>) -> Result<(DVector<f64>, MlpTape), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::Dimension {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut activations = vec![input.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = &layer.weight * activations.last().unwrap() + &layer.bias;
            let a = if i == last {
                z.clone()
            } else {
                z.map(|x| self.activation.apply(x))
            };
            pre.push(z);
            activations.push(a);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, MlpTape { activations, pre }))
    }

    /// Backpropagates `d loss / d output` through the tape, accumulating into
    /// `grads` and returning `d loss / d input`.
    pub fn backward(
        &self,
        tape: &MlpTape,
        grad_out: &DVector<f64>,
        grads: &mut MlpGrads,
    ) -> DVector<f64> {
        let last = self.layers.len() - 1;
        let mut delta = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if i != last {
                for (d, z) in delta.iter_mut().zip(tape.pre[i].iter()) {
                    *d *= self.activation.derivative(*z);
                }
            }
            grads.layers[i].weight += &delta * tape.activations[i].transpose();
            grads.layers[i].bias += &delta;
            delta = self.layers[i].weight.transpose() * delta;
        }
        delta
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: DMatrix::zeros(l.weight.nrows(), l.weight.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Flattened view of all parameters, row-major per layer, weight then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.transpose().iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in &mut self.layers {
            let (r, c) = (l.weight.nrows(), l.weight.ncols());
            for i in 0..r {
                for j in 0..c {
                    l.weight[(i, j)] = *it.next().expect("flat params too short");
                }
            }
            for i in 0..r {
                l.bias[i] = *it.next().expect("flat params too short");
            }
        }
        assert!(it.next().is_none(), "flat params too long");
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.transpose().iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight *= s;
            l.bias *= s;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weight.iter().map(|v| v * v).sum::<f64>()
                + l.bias.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Diagonal Gaussian policy: mean from the MLP, state-independent log-std.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: DVector<f64>,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        activation: Activation,
        initial_log_std: f64,
        rng: &mut impl Rng,
    ) -> GaussianPolicy {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        GaussianPolicy {
            mean_net: Mlp::new(&sizes, activation, rng),
            log_std: DVector::from_element(action_dim, initial_log_std),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn forward(&self, obs: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>), NnError> {
        Ok((self.mean_net.forward(obs)?, self.log_std.clone()))
    }

    pub fn sample_action(
        &self,
        obs: &DVector<f64>,
        rng: &mut impl Rng,
    ) -> Result<(DVector<f64>, f64), NnError> {
        let mean = self.mean_net.forward(obs)?;
        let action = DVector::from_fn(mean.len(), |i, _| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            mean[i] + self.log_std[i].exp() * z
        });
        let lp = self.log_prob(&mean, &action);
        Ok((action, lp))
    }

    /// Diagonal Gaussian log density of `action` under `mean` and the stored
    /// log-std.
    pub fn log_prob(&self, mean: &DVector<f64>, action: &DVector<f64>) -> f64 {
        let mut lp = 0.0;
        for i in 0..mean.len() {
            let sigma = self.log_std[i].exp();
            let z = (action[i] - mean[i]) / sigma;
            lp += -0.5 * z * z - self.log_std[i] - 0.5 * LOG_2PI;
        }
        lp
    }

    /// Entropy of the diagonal Gaussian: Σ (log σ + ½ log 2πe).
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| ls + 0.5 * (LOG_2PI + 1.0))
            .sum()
    }
}

/// Adam state for one parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> AdamState {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Bias-corrected Adam update in place. `grads` must already carry any
    /// global-norm clipping.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), grads.len(), "param/grad shape mismatch");
        assert_eq!(params.len(), self.m.len(), "adam state shape mismatch");
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `grads` so its global L2 norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut mlp = Mlp::new(&[4, 8, 2], Activation::Tanh, &mut rng);
        let zeros = vec![0.0; mlp.num_params()];
        mlp.set_flat_params(&zeros);
        let out = mlp.forward(&DVector::from_element(4, 1.0)).unwrap();
        assert_eq!(out, DVector::zeros(2));
    }

    #[test]
    fn tanh_identity_network_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut mlp = Mlp::new(&[1, 1, 1], Activation::Tanh, &mut rng);
        mlp.set_flat_params(&[1.0, 0.0, 1.0, 0.0]);
        let out = mlp.forward(&DVector::zeros(1)).unwrap();
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        // independent matrix-arithmetic reimplementation of an 8→16→2 pass
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mlp = Mlp::new(&[8, 16, 2], Activation::Elu, &mut rng);
        let obs = DVector::from_fn(8, |i, _| (i as f64 * 0.37).sin());
        let out = mlp.forward(&obs).unwrap();

        let z1 = &mlp.layers[0].weight * &obs + &mlp.layers[0].bias;
        let a1 = z1.map(|x| if x > 0.0 { x } else { x.exp() - 1.0 });
        let z2 = &mlp.layers[1].weight * &a1 + &mlp.layers[1].bias;
        assert!((out - z2).abs().max() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mlp = Mlp::new(&[4, 2], Activation::Tanh, &mut rng);
        assert!(mlp.forward(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn log_prob_at_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let policy = GaussianPolicy::new(2, &[], 3, Activation::Tanh, 0.0, &mut rng);
        let mean = DVector::zeros(3);
        let lp = policy.log_prob(&mean, &mean);
        assert_relative_eq!(lp, -1.5 * LOG_2PI, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_std_sample_is_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut policy = GaussianPolicy::new(3, &[8], 2, Activation::Tanh, -20.0, &mut rng);
        policy.log_std.fill(-20.0);
        let obs = DVector::from_element(3, 0.4);
        let mean = policy.mean_net.forward(&obs).unwrap();
        let (a, _) = policy.sample_action(&obs, &mut rng).unwrap();
        assert!((a - mean).abs().max() < 1e-6);
    }

    #[test]
    fn sample_statistics_match_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut policy = GaussianPolicy::new(1, &[], 1, Activation::Tanh, 0.0, &mut rng);
        policy.mean_net.set_flat_params(&[0.0, 0.7]); // weight 0, bias 0.7
        policy.log_std[0] = (0.5f64).ln();
        let n = 100_000;
        let obs = DVector::zeros(1);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let (a, lp) = policy.sample_action(&obs, &mut rng).unwrap();
            sum += a[0];
            sum2 += a[0] * a[0];
            // independent density evaluation at the sampled point
            let z = (a[0] - 0.7) / 0.5;
            let expected = -0.5 * z * z - (0.5f64).ln() - 0.5 * LOG_2PI;
            assert_relative_eq!(lp, expected, epsilon = 1e-12);
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        let se_mean = 0.5 / (n as f64).sqrt();
        assert!((mean - 0.7).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((std - 0.5).abs() < 3.0 * 0.5 / (2.0 * n as f64).sqrt() * 2.0, "std {std}");
    }

    #[test]
    fn backward_matches_finite_differences() {
        // scalar loss: sum of squared outputs; check every parameter
        for act in [Activation::Tanh, Activation::Elu] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut mlp = Mlp::new(&[3, 4, 2], act, &mut rng);
            let obs = DVector::from_vec(vec![0.3, -0.8, 0.5]);

            let (out, tape) = mlp.forward_tape(&obs).unwrap();
            let mut grads = mlp.zero_grads();
            mlp.backward(&tape, &(2.0 * &out), &mut grads);
            let analytic = grads.flat();

            let params = mlp.flat_params();
            let h = 1e-6;
            for (i, &p) in params.iter().enumerate() {
                let mut plus = params.clone();
                plus[i] = p + h;
                mlp.set_flat_params(&plus);
                let f_plus: f64 = mlp.forward(&obs).unwrap().iter().map(|v| v * v).sum();
                let mut minus = params.clone();
                minus[i] = p - h;
                mlp.set_flat_params(&minus);
                let f_minus: f64 = mlp.forward(&obs).unwrap().iter().map(|v| v * v).sum();
                mlp.set_flat_params(&params);
                let fd = (f_plus - f_minus) / (2.0 * h);
                assert!(
                    (analytic[i] - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "param {i}: analytic {} vs fd {}",
                    analytic[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_null_update() {
        let mut state = AdamState::new(3);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        state.update(&mut params, &[0.0; 3], 1e-3);
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let mut state = AdamState::new(1);
        let mut params = vec![0.0];
        state.update(&mut params, &[1.0], 1e-3);
        // first step: m̂ = g, v̂ = g² → Δ = lr·g/(|g| + ε)
        let expected = -1e-3 * 1.0 / (1.0 + 1e-8);
        assert_relative_eq!(params[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn global_norm_clipping() {
        let mut grads = vec![6.0, 8.0]; // norm 10
        let norm = clip_global_norm(&mut grads, 1.0);
        assert_relative_eq!(norm, 10.0, epsilon = 1e-12);
        assert_relative_eq!(grads[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(grads[1], 0.8, epsilon = 1e-12);
    }
}
