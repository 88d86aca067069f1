//! The locomotion reward table: tracking, gait, and regularization rows,
//! weighted, summed, and clamped at zero.

use nalgebra::DVector;

use crate::config::RewardConfig;

pub const NUM_REWARD_TERMS: usize = 22;

pub const REWARD_NAMES: [&str; NUM_REWARD_TERMS] = [
    "survival",
    "tracking_x",
    "tracking_y",
    "tracking_yaw",
    "base_height",
    "orientation",
    "torque",
    "torque_tiredness",
    "power",
    "lin_vel_z",
    "ang_vel_xy",
    "joint_vel",
    "joint_acc",
    "base_acc",
    "action_rate",
    "joint_pos_limit",
    "collision",
    "feet_swing",
    "feet_slip",
    "feet_yaw",
    "feet_roll",
    "feet_distance",
];

/// Unweighted value of every reward row, in `REWARD_NAMES` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub terms: [f64; NUM_REWARD_TERMS],
}

impl RewardBreakdown {
    pub fn weighted(&self, cfg: &RewardConfig) -> [f64; NUM_REWARD_TERMS] {
        let w = weights(cfg);
        let mut out = [0.0; NUM_REWARD_TERMS];
        for i in 0..NUM_REWARD_TERMS {
            out[i] = w[i] * self.terms[i];
        }
        out
    }
}

pub fn weights(cfg: &RewardConfig) -> [f64; NUM_REWARD_TERMS] {
    [
        cfg.survival,
        cfg.tracking_x,
        cfg.tracking_y,
        cfg.tracking_yaw,
        cfg.base_height,
        cfg.orientation,
        cfg.torque,
        cfg.torque_tiredness,
        cfg.power,
        cfg.lin_vel_z,
        cfg.ang_vel_xy,
        cfg.joint_vel,
        cfg.joint_acc,
        cfg.base_acc,
        cfg.action_rate,
        cfg.joint_pos_limit,
        cfg.collision,
        cfg.feet_swing,
        cfg.feet_slip,
        cfg.feet_yaw,
        cfg.feet_roll,
        cfg.feet_distance,
    ]
}

/// Everything the reward table reads for one control step. Planar embedding:
/// lateral (y) and yaw channels are identically zero, feet yaw maps to
/// foot pitch relative to the base, feet roll is identically zero.
#[derive(Debug, Clone)]
pub struct RewardInputs {
    pub command: [f64; 3],
    /// `true` when the command is stand-still (gait clock inactive).
    pub stand_still: bool,
    /// World-frame base linear velocity (x, y, z).
    pub base_lin_vel: [f64; 3],
    /// Base angular velocity (roll, pitch, yaw rates).
    pub base_ang_vel: [f64; 3],
    /// Base height above local ground.
    pub base_height: f64,
    /// Projected gravity in the base frame.
    pub gravity: [f64; 3],
    /// Finite-difference base linear acceleration.
    pub base_lin_acc: [f64; 3],
    /// Finite-difference base angular acceleration.
    pub base_ang_acc: [f64; 3],
    /// Mean applied joint torques over the control step.
    pub torques: DVector<f64>,
    pub torque_limits: DVector<f64>,
    pub joint_pos: DVector<f64>,
    pub joint_vel: DVector<f64>,
    /// Finite-difference joint acceleration.
    pub joint_acc: DVector<f64>,
    pub joint_lower: DVector<f64>,
    pub joint_upper: DVector<f64>,
    pub action: DVector<f64>,
    pub prev_action: DVector<f64>,
    /// Per foot: expected to swing in the current gait window.
    pub swing_expected: [bool; 2],
    /// Per foot: height above ground exceeds the swing threshold.
    pub swinging: [bool; 2],
    /// Per foot: in ground contact (stance).
    pub stance: [bool; 2],
    /// Per foot: world velocity (x, z).
    pub foot_vel: [[f64; 2]; 2],
    /// Per foot: pitch relative to the base.
    pub foot_pitch_rel: [f64; 2],
    /// Distance between the two feet.
    pub feet_distance: f64,
    pub n_collision: usize,
}

/// Computes every reward row, applies the table weights, and clamps the total
/// at zero. Returns `(total, unweighted breakdown)`.
pub fn compute_rewards(inp: &RewardInputs, cfg: &RewardConfig) -> (f64, RewardBreakdown) {
    let sq = |v: f64| v * v;
    let n = inp.torques.len();

    let survival = 1.0;
    let tracking_x = (-sq(inp.command[0] - inp.base_lin_vel[0]) / cfg.sigma_x).exp();
    let tracking_y = (-sq(inp.command[1] - inp.base_lin_vel[1]) / cfg.sigma_y).exp();
    let tracking_yaw = (-sq(inp.command[2] - inp.base_ang_vel[2]) / cfg.sigma_yaw).exp();
    let base_height = sq(cfg.h_des - inp.base_height);
    let orientation = sq(inp.gravity[0]) + sq(inp.gravity[1]);

    let torque = inp.torques.iter().map(|t| t * t).sum::<f64>();
    let tiredness = (0..n)
        .map(|i| sq(inp.torques[i] / inp.torque_limits[i]))
        .sum::<f64>();
    let power = inp.torques.dot(&inp.joint_vel).max(0.0);
    let lin_vel_z = sq(inp.base_lin_vel[2]);
    let ang_vel_xy = sq(inp.base_ang_vel[0]) + sq(inp.base_ang_vel[1]);
    let joint_vel = inp.joint_vel.iter().map(|v| v * v).sum::<f64>();
    let joint_acc = inp.joint_acc.iter().map(|a| a * a).sum::<f64>();
    let base_acc = inp.base_lin_acc.iter().map(|a| a * a).sum::<f64>()
        + inp.base_ang_acc.iter().map(|a| a * a).sum::<f64>();
    let action_rate = (0..inp.action.len())
        .map(|i| sq(inp.action[i] - inp.prev_action[i]))
        .sum::<f64>();
    let joint_pos_limit = (0..n)
        .map(|i| {
            (inp.joint_pos[i] > inp.joint_upper[i]) as usize
                + (inp.joint_pos[i] < inp.joint_lower[i]) as usize
        })
        .sum::<usize>() as f64;
    let collision = inp.n_collision as f64;

    // gait rows are gated on the clock being active
    let mut feet_swing = 0.0;
    let mut feet_slip = 0.0;
    for f in 0..2 {
        if !inp.stand_still && inp.swinging[f] && inp.swing_expected[f] {
            feet_swing += 1.0;
        }
        if inp.stance[f] {
            feet_slip += sq(inp.foot_vel[f][0]) + sq(inp.foot_vel[f][1]);
        }
    }
    let feet_yaw = sq(inp.foot_pitch_rel[0]) + sq(inp.foot_pitch_rel[1]);
    let feet_roll = 0.0;
    let feet_distance = (cfg.d_ref - inp.feet_distance).max(0.0);

    let breakdown = RewardBreakdown {
        terms: [
            survival,
            tracking_x,
            tracking_y,
            tracking_yaw,
            base_height,
            orientation,
            torque,
            tiredness,
            power,
            lin_vel_z,
            ang_vel_xy,
            joint_vel,
            joint_acc,
            base_acc,
            action_rate,
            joint_pos_limit,
            collision,
            feet_swing,
            feet_slip,
            feet_yaw,
            feet_roll,
            feet_distance,
        ],
    };
    let total = breakdown
        .weighted(cfg)
        .iter()
        .sum::<f64>()
        .max(0.0);
    (total, breakdown)
}

/// Phase-window gait assignment: the left foot is expected to swing in
/// `[0, 0.5)`, the right in `[0.5, 1)`. Returns per-foot
/// `(swing_expected, swinging)`.
pub fn gait_indicator(
    phase: f64,
    active: bool,
    foot_heights: [f64; 2],
    swing_threshold: f64,
) -> [(bool, bool); 2] {
    if !active {
        return [(false, false); 2];
    }
    let left_expected = phase < 0.5;
    [
        (left_expected, foot_heights[0] > swing_threshold),
        (!left_expected, foot_heights[1] > swing_threshold),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RewardConfig;

    fn zero_inputs(n: usize) -> RewardInputs {
        RewardInputs {
            command: [0.0; 3],
            stand_still: false,
            base_lin_vel: [0.0; 3],
            base_ang_vel: [0.0; 3],
            base_height: 0.68,
            gravity: [0.0, 0.0, -1.0],
            base_lin_acc: [0.0; 3],
            base_ang_acc: [0.0; 3],
            torques: DVector::zeros(n),
            torque_limits: DVector::from_element(n, 60.0),
            joint_pos: DVector::zeros(n),
            joint_vel: DVector::zeros(n),
            joint_acc: DVector::zeros(n),
            joint_lower: DVector::from_element(n, -1.0),
            joint_upper: DVector::from_element(n, 1.0),
            action: DVector::zeros(n),
            prev_action: DVector::zeros(n),
            swing_expected: [false; 2],
            swinging: [false; 2],
            stance: [true; 2],
            foot_vel: [[0.0; 2]; 2],
            foot_pitch_rel: [0.0; 2],
            feet_distance: 0.3,
            n_collision: 0,
        }
    }

    #[test]
    fn perfect_tracking_terms_are_one() {
        let mut inp = zero_inputs(6);
        inp.command = [0.5, 0.0, 0.0];
        inp.base_lin_vel = [0.5, 0.0, 0.0];
        let (_, b) = compute_rewards(&inp, &RewardConfig::default());
        assert_eq!(b.terms[1], 1.0);
        assert_eq!(b.terms[2], 1.0);
        assert_eq!(b.terms[3], 1.0);
    }

    #[test]
    fn table_weights_match_published_values() {
        let cfg = RewardConfig::default();
        let w = weights(&cfg);
        assert_eq!(w[0], 0.025); // survival
        assert_eq!(w[1], 1.0); // tracking x
        assert_eq!(w[3], 0.5); // tracking yaw
        assert_eq!(w[4], -20.0); // base height
        assert_eq!(w[5], -5.0); // orientation
        assert_eq!(w[6], -2e-4); // torque
        assert_eq!(w[7], -1e-2); // torque tiredness
        assert_eq!(w[8], -2e-4); // power
        assert_eq!(w[9], -2.0); // lin vel z
        assert_eq!(w[10], -0.2); // ang vel xy
        assert_eq!(w[11], -1e-4); // joint velocity
        assert_eq!(w[12], -1e-7); // joint acceleration
        assert_eq!(w[13], -1e-4); // base acceleration
        assert_eq!(w[14], -1.0); // action rate
        assert_eq!(w[15], -1.0); // joint position limit
        assert_eq!(w[16], -1.0); // collision
        assert_eq!(w[17], 3.0); // feet swing
        assert_eq!(w[18], -0.1); // feet slip
        assert_eq!(w[19], -1.0); // feet yaw
        assert_eq!(w[20], -0.1); // feet roll
        assert_eq!(w[21], -1.0); // feet distance
    }

    #[test]
    fn total_is_clamped_at_zero() {
        let mut inp = zero_inputs(6);
        inp.base_height = 0.1; // huge height error → large negative sum
        let (total, _) = compute_rewards(&inp, &RewardConfig::default());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn gait_windows() {
        let g = gait_indicator(0.25, true, [0.05, 0.0], 0.03);
        assert_eq!(g[0], (true, true)); // left expected and swinging
        assert_eq!(g[1], (false, false));
        let g = gait_indicator(0.75, true, [0.0, 0.05], 0.03);
        assert_eq!(g[0], (false, false));
        assert_eq!(g[1], (true, true));
    }

    #[test]
    fn inactive_clock_contributes_no_swing_reward() {
        let g = gait_indicator(0.25, false, [0.05, 0.05], 0.03);
        assert_eq!(g, [(false, false); 2]);
        let mut inp = zero_inputs(6);
        inp.stand_still = true;
        inp.swinging = [true, true];
        inp.swing_expected = [true, true];
        let (_, b) = compute_rewards(&inp, &RewardConfig::default());
        assert_eq!(b.terms[17], 0.0);
    }

    #[test]
    fn swing_threshold_boundary() {
        let g = gait_indicator(0.1, true, [0.05, 0.0], 0.03);
        assert!(g[0].1);
        let g = gait_indicator(0.1, true, [0.02, 0.0], 0.03);
        assert!(!g[0].1);
    }
}
