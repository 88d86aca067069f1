//! PPO with an asymmetric actor-critic: rollout collection, generalized
//! advantage estimation with distinct bootstrap semantics for failures versus
//! time limits, and the clipped-surrogate update.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PpoHyperParams, RunConfig};
use crate::env::VecEnv;
use crate::nn::{clip_global_norm, Activation, AdamState, GaussianPolicy, Mlp, NnError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("unknown activation: {0}")]
    UnknownActivation(String),
    #[error("non-finite {0} at iteration {1}")]
    NonFinite(&'static str, usize),
}

/// One rollout of `horizon` control steps across every env, stored flat in
/// `[t][env]` order.
pub struct RolloutBuffer {
    pub horizon: usize,
    pub num_envs: usize,
    pub actor_obs: Vec<DVector<f64>>,
    pub critic_obs: Vec<DVector<f64>>,
    pub actions: Vec<DVector<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// V(s_t) under the rollout critic.
    pub values: Vec<f64>,
    /// Bootstrap value for the transition out of (t, env): zero after a
    /// failure, V(terminal or next state) otherwise.
    pub next_values: Vec<f64>,
    /// Episode boundary after this transition (failure, timeout, or command
    /// truncation): advantage accumulation must not flow across it.
    pub cut: Vec<bool>,
    /// Lengths of episodes that finished during the rollout.
    pub finished_episode_lengths: Vec<usize>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.horizon * self.num_envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn idx(&self, t: usize, env: usize) -> usize {
        t * self.num_envs + env
    }
}

/// Runs the policy for `horizon` steps, recording everything the update needs.
pub fn collect_rollout(
    env: &mut dyn VecEnv,
    policy: &GaussianPolicy,
    critic: &Mlp,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<RolloutBuffer, NnError> {
    let n = env.num_envs();
    let mut buf = RolloutBuffer {
        horizon,
        num_envs: n,
        actor_obs: Vec::with_capacity(horizon * n),
        critic_obs: Vec::with_capacity(horizon * n),
        actions: Vec::with_capacity(horizon * n),
        log_probs: Vec::with_capacity(horizon * n),
        rewards: Vec::with_capacity(horizon * n),
        values: Vec::with_capacity(horizon * n),
        next_values: vec![0.0; horizon * n],
        cut: Vec::with_capacity(horizon * n),
        finished_episode_lengths: Vec::new(),
    };

    let mut obs = env.observations();
    for t in 0..horizon {
        let mut actions = Vec::with_capacity(n);
        for o in &obs {
            let (a, lp) = policy.sample_action(&o.actor, rng)?;
            let v = critic.forward(&o.critic)?[0];
            buf.actor_obs.push(o.actor.clone());
            buf.critic_obs.push(o.critic.clone());
            buf.log_probs.push(lp);
            buf.values.push(v);
            actions.push(a);
        }
        buf.actions.extend(actions.iter().cloned());
        let results = env.step(&actions);
        for (i, r) in results.iter().enumerate() {
            buf.rewards.push(r.reward);
            let boundary = r.done || r.truncation;
            buf.cut.push(boundary);
            let k = buf.idx(t, i);
            if boundary {
                // a failure bootstraps zero; a time limit or command change
                // bootstraps the critic's value of the terminal state
                buf.next_values[k] = if r.done && !r.timeout && !r.truncation {
                    0.0
                } else {
                    critic.forward(&r.obs.critic)?[0]
                };
            }
            if r.done {
                buf.finished_episode_lengths.push(r.episode_step);
            }
        }
        obs = env.observations();
    }
    // bootstrap the final transition of each env from the live state
    for (i, o) in obs.iter().enumerate() {
        let k = buf.idx(horizon - 1, i);
        if !buf.cut[k] {
            buf.next_values[k] = critic.forward(&o.critic)?[0];
        }
    }
    // interior non-boundary transitions bootstrap from the next stored value
    for t in 0..horizon - 1 {
        for i in 0..n {
            let k = buf.idx(t, i);
            if !buf.cut[k] {
                buf.next_values[k] = buf.values[buf.idx(t + 1, i)];
            }
        }
    }
    Ok(buf)
}

/// Generalized advantage estimation over `[t][env]`-flattened arrays.
///
/// `next_values[k]` is the bootstrap value of the state following transition
/// `k` (with terminal semantics already applied); `cut[k]` stops the
/// advantage recursion at episode boundaries. Returns `(advantages, returns)`
/// with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    cut: &[bool],
    horizon: usize,
    num_envs: usize,
    gamma: f64,
    lam: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), horizon * num_envs);
    assert_eq!(values.len(), rewards.len());
    assert_eq!(next_values.len(), rewards.len());
    assert_eq!(cut.len(), rewards.len());
    let mut adv = vec![0.0; rewards.len()];
    for i in 0..num_envs {
        let mut running = 0.0;
        for t in (0..horizon).rev() {
            let k = t * num_envs + i;
            let delta = rewards[k] + gamma * next_values[k] - values[k];
            running = delta
                + if cut[k] {
                    0.0
                } else {
                    gamma * lam * running
                };
            adv[k] = running;
        }
    }
    let ret: Vec<f64> = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Per-iteration training statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_episode_length: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub learning_rate: f64,
    pub curriculum_level: f64,
    pub wall_time_s: f64,
}

impl IterationStats {
    pub fn csv_header() -> &'static str {
        "iteration,mean_reward,mean_episode_length,policy_loss,value_loss,entropy,\
         clip_fraction,approx_kl,grad_norm,learning_rate,curriculum_level,wall_time_s"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.mean_reward,
            self.mean_episode_length,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
            self.approx_kl,
            self.grad_norm,
            self.learning_rate,
            self.curriculum_level,
            self.wall_time_s
        )
    }
}

/// Actor and critic with their optimizer state.
pub struct Learner {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    pub learning_rate: f64,
}

impl Learner {
    pub fn new(cfg: &RunConfig, actor_dim: usize, critic_dim: usize, action_dim: usize, rng: &mut impl Rng) -> Result<Learner, TrainError> {
        let activation = Activation::parse(&cfg.network.activation)
            .ok_or_else(|| TrainError::UnknownActivation(cfg.network.activation.clone()))?;
        let policy = GaussianPolicy::new(
            actor_dim,
            &cfg.network.actor_hidden,
            action_dim,
            activation,
            cfg.ppo.initial_action_logstd,
            rng,
        );
        let mut critic_sizes = vec![critic_dim];
        critic_sizes.extend_from_slice(&cfg.network.critic_hidden);
        critic_sizes.push(1);
        let critic = Mlp::new(&critic_sizes, activation, rng);
        let actor_adam = AdamState::new(policy.mean_net.num_params() + action_dim);
        let critic_adam = AdamState::new(critic.num_params());
        Ok(Learner {
            policy,
            critic,
            actor_adam,
            critic_adam,
            learning_rate: cfg.ppo.learning_rate,
        })
    }

    fn actor_flat(&self) -> Vec<f64> {
        let mut p = self.policy.mean_net.flat_params();
        p.extend(self.policy.log_std.iter());
        p
    }

    fn set_actor_flat(&mut self, flat: &[f64]) {
        let n = self.policy.mean_net.num_params();
        self.policy.mean_net.set_flat_params(&flat[..n]);
        for (i, v) in flat[n..].iter().enumerate() {
            self.policy.log_std[i] = *v;
        }
    }
}

/// Mean/std advantage normalization over the whole batch.
fn normalize(adv: &mut [f64]) {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// One PPO update over a collected rollout: `num_epochs` passes of
/// `num_minibatches` minibatches, each applying one clipped-surrogate Adam
/// step to the actor and one value-regression step to the critic.
pub fn ppo_update(
    learner: &mut Learner,
    buf: &RolloutBuffer,
    hp: &PpoHyperParams,
    rng: &mut impl Rng,
) -> Result<(f64, f64, f64, f64, f64), NnError> {
    let total = buf.len();
    let (mut adv, ret) = compute_gae(
        &buf.rewards,
        &buf.values,
        &buf.next_values,
        &buf.cut,
        buf.horizon,
        buf.num_envs,
        hp.gamma,
        hp.lam,
    );
    normalize(&mut adv);

    let action_dim = learner.policy.action_dim();
    let mut policy_loss_sum = 0.0;
    let mut value_loss_sum = 0.0;
    let mut clip_count = 0usize;
    let mut kl_sum = 0.0;
    let mut grad_norm_sum = 0.0;
    let mut batches = 0usize;
    let mut samples = 0usize;

    let mut indices: Vec<usize> = (0..total).collect();
    for _ in 0..hp.num_epochs {
        indices.shuffle(rng);
        let mb_size = total.div_ceil(hp.num_minibatches);
        for mb in indices.chunks(mb_size) {
            let scale = 1.0 / mb.len() as f64;
            let mut actor_grads = learner.policy.mean_net.zero_grads();
            let mut log_std_grad = vec![0.0; action_dim];
            let mut critic_grads = learner.critic.zero_grads();

            for &k in mb {
                let (mean, tape) = learner.policy.mean_net.forward_tape(&buf.actor_obs[k])?;
                let lp_new = learner.policy.log_prob(&mean, &buf.actions[k]);
                let ratio = (lp_new - buf.log_probs[k]).exp();
                let a_hat = adv[k];
                let clipped = ratio.clamp(1.0 - hp.clip_eps, 1.0 + hp.clip_eps);
                policy_loss_sum -= (ratio * a_hat).min(clipped * a_hat);
                if (ratio - 1.0).abs() > hp.clip_eps {
                    clip_count += 1;
                }
                kl_sum += buf.log_probs[k] - lp_new;
                samples += 1;

                // surrogate gradient flows only where the unclipped branch is
                // active (the clipped branch is constant in the parameters)
                let active = if a_hat >= 0.0 {
                    ratio <= 1.0 + hp.clip_eps
                } else {
                    ratio >= 1.0 - hp.clip_eps
                };
                if active {
                    let g_lp = -a_hat * ratio * scale;
                    // d lp / d mean_i = (a_i - μ_i) / σ_i²
                    let mut g_mean = DVector::zeros(action_dim);
                    for i in 0..action_dim {
                        let sigma = learner.policy.log_std[i].exp();
                        let z = (buf.actions[k][i] - mean[i]) / sigma;
                        g_mean[i] = g_lp * z / sigma;
                        // d lp / d log_std_i = z² - 1
                        log_std_grad[i] += g_lp * (z * z - 1.0);
                    }
                    learner
                        .policy
                        .mean_net
                        .backward(&tape, &g_mean, &mut actor_grads);
                }

                let (v, vtape) = learner.critic.forward_tape(&buf.critic_obs[k])?;
                let err = v[0] - ret[k];
                value_loss_sum += hp.c_value * err * err;
                let g_v = DVector::from_element(1, 2.0 * hp.c_value * err * scale);
                learner.critic.backward(&vtape, &g_v, &mut critic_grads);
            }

            // entropy bonus: d(-c_e·H)/d log_std_i = -c_e
            for g in log_std_grad.iter_mut() {
                *g -= hp.c_entropy;
            }

            let mut actor_flat = actor_grads.flat();
            actor_flat.extend(log_std_grad.iter());
            let norm = clip_global_norm(&mut actor_flat, hp.max_grad_norm);
            grad_norm_sum += norm;
            batches += 1;
            let mut params = learner.actor_flat();
            let lr = learner.learning_rate;
            learner.actor_adam.update(&mut params, &actor_flat, lr);
            learner.set_actor_flat(&params);

            let mut critic_flat = critic_grads.flat();
            clip_global_norm(&mut critic_flat, hp.max_grad_norm);
            let mut cparams = learner.critic.flat_params();
            learner.critic_adam.update(&mut cparams, &critic_flat, lr);
            learner.critic.set_flat_params(&cparams);
        }
    }

    let approx_kl = kl_sum / samples as f64;
    if let Some(target) = hp.kl_target {
        if approx_kl > 2.0 * target {
            learner.learning_rate = (learner.learning_rate / 1.5).max(1e-6);
        } else if approx_kl < 0.5 * target && approx_kl >= 0.0 {
            learner.learning_rate = (learner.learning_rate * 1.5).min(1e-2);
        }
    }

    Ok((
        policy_loss_sum / samples as f64,
        value_loss_sum / samples as f64,
        clip_count as f64 / samples as f64,
        approx_kl,
        grad_norm_sum / batches as f64,
    ))
}

/// Full training run: `iterations` × (collect rollout → GAE → PPO update).
/// `on_iteration` fires after every update with the fresh stats and the
/// current learner, for logging and checkpointing.
pub fn train(
    cfg: &RunConfig,
    env: &mut dyn VecEnv,
    mut on_iteration: impl FnMut(&IterationStats, &Learner),
) -> Result<(Learner, Vec<IterationStats>), TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_7EA_C4E5);
    let mut learner = Learner::new(
        cfg,
        env.actor_dim(),
        env.critic_dim(),
        env.action_dim(),
        &mut rng,
    )?;
    let mut history = Vec::with_capacity(cfg.iterations);
    let start = std::time::Instant::now();
    for iteration in 0..cfg.iterations {
        let buf = collect_rollout(env, &learner.policy, &learner.critic, cfg.horizon_steps, &mut rng)?;
        let mean_reward = buf.rewards.iter().sum::<f64>() / buf.len() as f64;
        let mean_episode_length = if buf.finished_episode_lengths.is_empty() {
            f64::NAN
        } else {
            buf.finished_episode_lengths.iter().sum::<usize>() as f64
                / buf.finished_episode_lengths.len() as f64
        };
        let (policy_loss, value_loss, clip_fraction, approx_kl, grad_norm) =
            ppo_update(&mut learner, &buf, &cfg.ppo, &mut rng)?;
        if !policy_loss.is_finite() || !value_loss.is_finite() {
            return Err(TrainError::NonFinite("loss", iteration));
        }
        let stats = IterationStats {
            iteration,
            mean_reward,
            mean_episode_length,
            policy_loss,
            value_loss,
            entropy: learner.policy.entropy(),
            clip_fraction,
            approx_kl,
            grad_norm,
            learning_rate: learner.learning_rate,
            curriculum_level: env.curriculum_level(),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        on_iteration(&stats, &learner);
        history.push(stats);
    }
    Ok((learner, history))
}

/// Serializable training checkpoint; JSON keeps every f64 bit-exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub activation: String,
    pub action_scale: f64,
    pub actor_sizes: Vec<usize>,
    pub actor_params: Vec<f64>,
    pub log_std: Vec<f64>,
    pub critic_sizes: Vec<usize>,
    pub critic_params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_learner(learner: &Learner, cfg: &RunConfig, iteration: usize) -> Checkpoint {
        Checkpoint {
            iteration,
            activation: cfg.network.activation.clone(),
            action_scale: cfg.network.action_scale,
            actor_sizes: learner.policy.mean_net.layer_sizes(),
            actor_params: learner.policy.mean_net.flat_params(),
            log_std: learner.policy.log_std.iter().copied().collect(),
            critic_sizes: learner.critic.layer_sizes(),
            critic_params: learner.critic.flat_params(),
        }
    }

    pub fn into_networks(&self) -> Result<(GaussianPolicy, Mlp), TrainError> {
        let activation = Activation::parse(&self.activation)
            .ok_or_else(|| TrainError::UnknownActivation(self.activation.clone()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut mean_net = Mlp::new(&self.actor_sizes, activation, &mut rng);
        mean_net.set_flat_params(&self.actor_params);
        let mut critic = Mlp::new(&self.critic_sizes, activation, &mut rng);
        critic.set_flat_params(&self.critic_params);
        let policy = GaussianPolicy {
            mean_net,
            log_std: DVector::from_vec(self.log_std.clone()),
        };
        Ok((policy, critic))
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string(self).expect("checkpoint serializes"))
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Checkpoint> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
