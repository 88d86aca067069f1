//! Minimal 1-D velocity-tracking task used as a fast end-to-end check of the
//! training loop: a unit mass with drag, a force action, and an exponential
//! tracking reward. Anything that can learn should improve here in seconds.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::locomotion::SEED_STRIDE;
use crate::env::{ObservationBundle, RewardBreakdown, StepResult, VecEnv, NUM_REWARD_TERMS};

const DT: f64 = 0.05;
const FORCE_SCALE: f64 = 3.0;
const DRAG: f64 = 0.5;
const EPISODE_STEPS: usize = 100;

struct PointSlot {
    vel: f64,
    target: f64,
    step: usize,
    rng: ChaCha8Rng,
    prev_action: f64,
}

impl PointSlot {
    fn reset(&mut self) {
        self.vel = 0.0;
        self.target = self.rng.gen_range(-1.0..=1.0);
        self.step = 0;
        self.prev_action = 0.0;
    }

    fn obs(&self) -> ObservationBundle {
        let v = DVector::from_vec(vec![self.target, self.vel, self.prev_action]);
        ObservationBundle {
            actor: v.clone(),
            critic: v,
        }
    }
}

pub struct PointMassEnv {
    slots: Vec<PointSlot>,
}

impl PointMassEnv {
    pub fn new(num_envs: usize, seed: u64) -> PointMassEnv {
        let mut slots: Vec<PointSlot> = (0..num_envs)
            .map(|i| PointSlot {
                vel: 0.0,
                target: 0.0,
                step: 0,
                rng: ChaCha8Rng::seed_from_u64(
                    seed.wrapping_add((i as u64).wrapping_mul(SEED_STRIDE)),
                ),
                prev_action: 0.0,
            })
            .collect();
        for s in &mut slots {
            s.reset();
        }
        PointMassEnv { slots }
    }
}

impl VecEnv for PointMassEnv {
    fn num_envs(&self) -> usize {
        self.slots.len()
    }

    fn actor_dim(&self) -> usize {
        3
    }

    fn critic_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset_all(&mut self) -> Vec<ObservationBundle> {
        for s in &mut self.slots {
            s.reset();
        }
        self.observations()
    }

    fn observations(&self) -> Vec<ObservationBundle> {
        self.slots.iter().map(|s| s.obs()).collect()
    }

    fn step(&mut self, actions: &[DVector<f64>]) -> Vec<StepResult> {
        assert_eq!(actions.len(), self.slots.len());
        self.slots
            .iter_mut()
            .zip(actions)
            .map(|(s, a)| {
                let u = if a[0].is_finite() { a[0].clamp(-1.0, 1.0) } else { 0.0 };
                let force = FORCE_SCALE * u - DRAG * s.vel;
                s.vel += force * DT;
                s.prev_action = u;
                s.step += 1;
                let err = s.target - s.vel;
                let reward = (-err * err / 0.25).exp();
                let timeout = s.step >= EPISODE_STEPS;
                let obs = s.obs();
                let episode_step = s.step;
                if timeout {
                    s.reset();
                }
                StepResult {
                    obs,
                    reward,
                    breakdown: RewardBreakdown {
                        terms: [0.0; NUM_REWARD_TERMS],
                    },
                    done: timeout,
                    timeout,
                    truncation: false,
                    episode_step,
                }
            })
            .collect()
    }
}
