//! Actor/critic observation layout and assembly.
//!
//! Actor block: commands (3), gait cycle (2), gravity vector (3), angular
//! velocity (3), joint positions (n), joint velocities (n), previous action
//! (n). Critic: the same block noise-free plus privileged state: body mass
//! (1), body CoM (3), base linear velocity (3), base height (1), push force
//! (2), push torque (3).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Named component layout shared by training and the deployment runtime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub components: Vec<(String, usize)>,
}

impl ObservationLayout {
    pub fn actor(num_joints: usize) -> ObservationLayout {
        ObservationLayout {
            components: vec![
                ("commands".to_string(), 3),
                ("gait_cycle".to_string(), 2),
                ("gravity".to_string(), 3),
                ("angular_velocity".to_string(), 3),
                ("joint_position".to_string(), num_joints),
                ("joint_velocity".to_string(), num_joints),
                ("previous_action".to_string(), num_joints),
            ],
        }
    }

    pub fn privileged() -> ObservationLayout {
        ObservationLayout {
            components: vec![
                ("body_mass".to_string(), 1),
                ("body_com".to_string(), 3),
                ("base_linear_velocity".to_string(), 3),
                ("base_height".to_string(), 1),
                ("push_force".to_string(), 2),
                ("push_torque".to_string(), 3),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.iter().map(|(_, d)| d).sum()
    }
}

/// Actor dimension for `n` joints: 11 + 3n.
pub fn actor_dim(num_joints: usize) -> usize {
    11 + 3 * num_joints
}

/// Critic dimension: actor block + 13 privileged entries.
pub fn critic_dim(num_joints: usize) -> usize {
    actor_dim(num_joints) + 13
}

/// Raw sensor-side inputs to the actor observation, before noise.
#[derive(Debug, Clone)]
pub struct ActorInputs {
    /// (v_x, v_y, ω_yaw) command.
    pub commands: [f64; 3],
    /// (cos 2πφ, sin 2πφ), or (0, 0) when the gait clock is inactive.
    pub gait: [f64; 2],
    /// Gravity direction in the base frame.
    pub gravity: [f64; 3],
    /// Base angular velocity (roll, pitch, yaw rates).
    pub angular_velocity: [f64; 3],
    /// Joint positions relative to the default pose.
    pub joint_pos: DVector<f64>,
    pub joint_vel: DVector<f64>,
    pub prev_action: DVector<f64>,
}

/// Privileged simulator-only inputs for the critic.
#[derive(Debug, Clone)]
pub struct PrivilegedInputs {
    pub body_mass: f64,
    pub body_com: [f64; 3],
    pub base_lin_vel: [f64; 3],
    pub base_height: f64,
    pub push_force: [f64; 2],
    pub push_torque: [f64; 3],
}

/// Per-channel-group uniform noise amplitudes.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoiseAmplitudes {
    pub gravity: f64,
    pub ang_vel: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
}

#[derive(Debug, Clone)]
pub struct ObservationBundle {
    pub actor: DVector<f64>,
    pub critic: DVector<f64>,
}

/// Assembles the actor observation in layout order; noise is additive uniform
/// `±amp` per channel, drawn from `noise_fn` in layout order.
pub fn assemble_actor(
    inputs: &ActorInputs,
    noise: &NoiseAmplitudes,
    mut noise_fn: impl FnMut(f64) -> f64,
) -> DVector<f64> {
    let n = inputs.joint_pos.len();
    let mut out = Vec::with_capacity(actor_dim(n));
    out.extend_from_slice(&inputs.commands);
    out.extend_from_slice(&inputs.gait);
    for g in inputs.gravity {
        out.push(g + noise_fn(noise.gravity));
    }
    for w in inputs.angular_velocity {
        out.push(w + noise_fn(noise.ang_vel));
    }
    for q in inputs.joint_pos.iter() {
        out.push(q + noise_fn(noise.joint_pos));
    }
    for qd in inputs.joint_vel.iter() {
        out.push(qd + noise_fn(noise.joint_vel));
    }
    out.extend(inputs.prev_action.iter());
    DVector::from_vec(out)
}

/// Assembles the full critic observation: noise-free actor block followed by
/// the privileged block.
pub fn assemble_critic(inputs: &ActorInputs, privileged: &PrivilegedInputs) -> DVector<f64> {
    let clean = assemble_actor(inputs, &NoiseAmplitudes::default(), |_| 0.0);
    let mut out: Vec<f64> = clean.iter().copied().collect();
    out.push(privileged.body_mass);
    out.extend_from_slice(&privileged.body_com);
    out.extend_from_slice(&privileged.base_lin_vel);
    out.push(privileged.base_height);
    out.extend_from_slice(&privileged.push_force);
    out.extend_from_slice(&privileged.push_torque);
    DVector::from_vec(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(n: usize) -> ActorInputs {
        ActorInputs {
            commands: [0.5, 0.0, 0.0],
            gait: [1.0, 0.0],
            gravity: [0.0, 0.0, -1.0],
            angular_velocity: [0.0, 0.1, 0.0],
            joint_pos: DVector::from_fn(n, |i, _| i as f64 * 0.01),
            joint_vel: DVector::zeros(n),
            prev_action: DVector::zeros(n),
        }
    }

    #[test]
    fn dims_match_table_for_twelve_joints() {
        assert_eq!(actor_dim(12), 47);
        assert_eq!(critic_dim(12), 60);
        assert_eq!(ObservationLayout::actor(12).dim(), 47);
        assert_eq!(
            ObservationLayout::actor(12).dim() + ObservationLayout::privileged().dim(),
            60
        );
    }

    #[test]
    fn zero_noise_critic_block_equals_actor() {
        let inp = inputs(12);
        let actor = assemble_actor(&inp, &NoiseAmplitudes::default(), |_| 0.0);
        let critic = assemble_critic(
            &inp,
            &PrivilegedInputs {
                body_mass: 18.0,
                body_com: [0.0; 3],
                base_lin_vel: [0.0; 3],
                base_height: 0.68,
                push_force: [0.0; 2],
                push_torque: [0.0; 3],
            },
        );
        assert_eq!(actor.len(), 47);
        assert_eq!(critic.len(), 60);
        for i in 0..actor.len() {
            assert_eq!(actor[i], critic[i]);
        }
    }
}
