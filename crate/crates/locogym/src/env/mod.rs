//! Vectorized locomotion environment: observations, rewards, gait clock,
//! commands, curriculum, terminations, domain randomization, pushes, and
//! actuation delay.

pub mod delay;
pub mod locomotion;
pub mod observation;
pub mod pointmass;
pub mod rewards;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use delay::DelayLine;
pub use locomotion::{LocomotionEnv, RandomizationSample};
pub use observation::{
    actor_dim, assemble_actor, assemble_critic, critic_dim, ActorInputs, NoiseAmplitudes,
    ObservationBundle, ObservationLayout, PrivilegedInputs,
};
pub use pointmass::PointMassEnv;
pub use rewards::{
    compute_rewards, gait_indicator, weights, RewardBreakdown, RewardInputs, NUM_REWARD_TERMS,
    REWARD_NAMES,
};

use crate::config::CommandConfig;

/// Velocity command; `stand_still` forces all channels to zero and parks the
/// gait clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandVector {
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub stand_still: bool,
}

impl CommandVector {
    pub fn stand() -> CommandVector {
        CommandVector {
            vx: 0.0,
            vy: 0.0,
            yaw_rate: 0.0,
            stand_still: true,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vx, self.vy, self.yaw_rate]
    }
}

/// Periodic gait phase; the observation pair is `(cos 2πφ, sin 2πφ)` while
/// walking and `(0, 0)` while standing.
#[derive(Debug, Clone, Copy)]
pub struct GaitClock {
    pub phase: f64,
    pub frequency: f64,
    pub active: bool,
}

impl GaitClock {
    pub fn new(frequency: f64) -> GaitClock {
        GaitClock {
            phase: 0.0,
            frequency,
            active: false,
        }
    }

    pub fn observation(&self) -> [f64; 2] {
        if self.active {
            let a = 2.0 * std::f64::consts::PI * self.phase;
            [a.cos(), a.sin()]
        } else {
            [0.0, 0.0]
        }
    }

    pub fn advance(&mut self, dt: f64) {
        if self.active {
            self.phase = (self.phase + self.frequency * dt).fract();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Running,
    Early,
    Timeout,
}

/// Early termination on low base height or excessive base speed; timeout on
/// the episode step limit. The two are distinguished because GAE bootstraps
/// them differently.
pub fn check_termination(
    base_height: f64,
    base_speed: f64,
    step_count: usize,
    h_min: f64,
    v_max: f64,
    max_steps: usize,
) -> Termination {
    if base_height < h_min || base_speed > v_max {
        Termination::Early
    } else if step_count >= max_steps {
        Termination::Timeout
    } else {
        Termination::Running
    }
}

/// Samples a new command: stand-still with probability `p_stand`, otherwise
/// velocities drawn uniformly from the curriculum-scaled ranges.
pub fn resample_command(
    cfg: &CommandConfig,
    curriculum_level: f64,
    rng: &mut impl rand::Rng,
) -> CommandVector {
    if rng.gen_range(0.0..1.0) < cfg.p_stand {
        return CommandVector::stand();
    }
    let scale = cfg.curriculum_initial_scale
        + (1.0 - cfg.curriculum_initial_scale) * curriculum_level.clamp(0.0, 1.0);
    let draw = |span: crate::config::Span, rng: &mut dyn rand::RngCore| -> f64 {
        let (lo, hi) = (span.min * scale, span.max * scale);
        if hi > lo {
            rand::Rng::gen_range(rng, lo..=hi)
        } else {
            lo
        }
    };
    CommandVector {
        vx: draw(cfg.vx_range, rng),
        vy: draw(cfg.vy_range, rng),
        yaw_rate: draw(cfg.yaw_range, rng),
        stand_still: false,
    }
}

/// Per-env step outcome. `obs` is the post-step observation; on `done` it is
/// the terminal observation (the env auto-resets internally).
#[derive(Debug, Clone)]
pub struct StepResult {
    pub obs: ObservationBundle,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
    pub timeout: bool,
    pub truncation: bool,
    pub episode_step: usize,
}

/// Batch-stepped environment contract consumed by the trainer.
pub trait VecEnv {
    fn num_envs(&self) -> usize;
    fn actor_dim(&self) -> usize;
    fn critic_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Resets every env and returns the initial observations.
    fn reset_all(&mut self) -> Vec<ObservationBundle>;
    /// Current (post-auto-reset) observation per env.
    fn observations(&self) -> Vec<ObservationBundle>;
    fn step(&mut self, actions: &[DVector<f64>]) -> Vec<StepResult>;
    /// Command-curriculum progress in [0, 1], for training metrics.
    fn curriculum_level(&self) -> f64 {
        0.0
    }
}

/// One trajectory-dump record per control step per env (JSON-lines).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajRecord {
    pub env: usize,
    pub step: usize,
    pub time: f64,
    pub q_gen: Vec<f64>,
    pub v_gen: Vec<f64>,
    pub action: Vec<f64>,
    pub reward_total: f64,
    pub rewards: BTreeMap<String, f64>,
    pub done: bool,
    pub timeout: bool,
    pub truncation: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn termination_thresholds() {
        use Termination::*;
        assert_eq!(check_termination(0.2, 0.0, 10, 0.4, 10.0, 1500), Early);
        assert_eq!(check_termination(0.68, 0.0, 1500, 0.4, 10.0, 1500), Timeout);
        assert_eq!(check_termination(0.68, 0.0, 10, 0.4, 10.0, 1500), Running);
        // excessive velocity is also an early exit
        assert_eq!(check_termination(0.68, 11.0, 10, 0.4, 10.0, 1500), Early);
    }

    #[test]
    fn stand_still_zeroes_everything() {
        let c = CommandVector::stand();
        assert_eq!(c.as_array(), [0.0; 3]);
        assert!(c.stand_still);
    }

    #[test]
    fn gait_clock_observation() {
        let mut clock = GaitClock::new(1.5);
        assert_eq!(clock.observation(), [0.0, 0.0]); // inactive
        clock.active = true;
        assert_eq!(clock.observation(), [1.0, 0.0]); // phase 0
        clock.phase = 0.25;
        let [c, s] = clock.observation();
        assert!(c.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curriculum_zero_collapses_range() {
        let cfg = CommandConfig {
            p_stand: 0.0,
            ..CommandConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let c = resample_command(&cfg, 0.0, &mut rng);
            let lim = cfg.vx_range.max * cfg.curriculum_initial_scale;
            assert!(c.vx.abs() <= lim + 1e-12, "vx {} beyond {}", c.vx, lim);
        }
    }

    #[test]
    fn p_stand_one_always_stands() {
        let cfg = CommandConfig {
            p_stand: 1.0,
            ..CommandConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert!(resample_command(&cfg, 1.0, &mut rng).stand_still);
        }
    }

    #[test]
    fn stand_fraction_matches_p_stand() {
        let cfg = CommandConfig {
            p_stand: 0.3,
            ..CommandConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let stands = (0..n)
            .filter(|_| resample_command(&cfg, 1.0, &mut rng).stand_still)
            .count();
        let frac = stands as f64 / n as f64;
        assert!((frac - 0.3).abs() < 0.02, "stand fraction {frac}");
    }
}
