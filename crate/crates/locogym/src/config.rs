//! Run configuration: loading, validation, defaults, and dotted-key overrides.
//!
//! The config file is a YAML mapping. Every key has a documented default, so an
//! empty file yields the default profile. Unknown keys are hard errors.

use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invariant violation: {key}: {message}")]
    Invariant { key: String, message: String },
    #[error("override key not found: {0}")]
    UnknownOverrideKey(String),
    #[error("override {key}: {message}")]
    BadOverride { key: String, message: String },
}

/// Inclusive `[min, max]` range, serialized as a two-element sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    pub const fn new(min: f64, max: f64) -> Self {
        Span { min, max }
    }

    /// Collapsed range, always sampling the same value.
    pub const fn point(v: f64) -> Self {
        Span { min: v, max: v }
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

impl From<[f64; 2]> for Span {
    fn from(v: [f64; 2]) -> Self {
        Span {
            min: v[0],
            max: v[1],
        }
    }
}

impl From<Span> for [f64; 2] {
    fn from(s: Span) -> Self {
        [s.min, s.max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyperParams {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub c_value: f64,
    pub c_entropy: f64,
    pub learning_rate: f64,
    pub num_epochs: usize,
    pub num_minibatches: usize,
    pub max_grad_norm: f64,
    pub initial_action_logstd: f64,
    /// Optional KL-adaptive learning rate; fixed LR when absent.
    pub kl_target: Option<f64>,
}

impl Default for PpoHyperParams {
    fn default() -> Self {
        PpoHyperParams {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            c_value: 1.0,
            c_entropy: 0.01,
            learning_rate: 3e-4,
            num_epochs: 5,
            num_minibatches: 4,
            max_grad_norm: 1.0,
            initial_action_logstd: 0.0,
            kl_target: None,
        }
    }
}

/// One weight per reward component plus the shaping constants.
/// Penalty weights are negative, matching their sign in the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub survival: f64,
    pub tracking_x: f64,
    pub tracking_y: f64,
    pub tracking_yaw: f64,
    pub base_height: f64,
    pub orientation: f64,
    pub torque: f64,
    pub torque_tiredness: f64,
    pub power: f64,
    pub lin_vel_z: f64,
    pub ang_vel_xy: f64,
    pub joint_vel: f64,
    pub joint_acc: f64,
    pub base_acc: f64,
    pub action_rate: f64,
    pub joint_pos_limit: f64,
    pub collision: f64,
    pub feet_swing: f64,
    pub feet_slip: f64,
    pub feet_yaw: f64,
    pub feet_roll: f64,
    pub feet_distance: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_yaw: f64,
    /// Desired base height above ground, meters.
    pub h_des: f64,
    /// Reference feet separation, meters.
    pub d_ref: f64,
    /// Foot height above ground counting as swing, meters.
    pub swing_height_threshold: f64,
    /// Gait frequency, Hz.
    pub gait_frequency: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            survival: 0.025,
            tracking_x: 1.0,
            tracking_y: 1.0,
            tracking_yaw: 0.5,
            base_height: -20.0,
            orientation: -5.0,
            torque: -2e-4,
            torque_tiredness: -1e-2,
            power: -2e-4,
            lin_vel_z: -2.0,
            ang_vel_xy: -0.2,
            joint_vel: -1e-4,
            joint_acc: -1e-7,
            base_acc: -1e-4,
            action_rate: -1.0,
            joint_pos_limit: -1.0,
            collision: -1.0,
            feet_swing: 3.0,
            feet_slip: -0.1,
            feet_yaw: -1.0,
            feet_roll: -0.1,
            feet_distance: -1.0,
            sigma_x: 0.25,
            sigma_y: 0.25,
            sigma_yaw: 0.25,
            h_des: 0.68,
            d_ref: 0.2,
            swing_height_threshold: 0.03,
            gait_frequency: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandConfig {
    /// Probability that a resampled command is "stand still".
    pub p_stand: f64,
    /// Seconds between command resamples, drawn per episode.
    pub resample_interval: Span,
    /// Forward velocity command range at full curriculum, m/s.
    pub vx_range: Span,
    /// Lateral velocity command range. Identically zero in planar builds.
    pub vy_range: Span,
    /// Yaw rate command range. Identically zero in planar builds.
    pub yaw_range: Span,
    /// Command-range scale at curriculum level zero.
    pub curriculum_initial_scale: f64,
    /// Moving-average tracking reward that advances the curriculum.
    pub curriculum_threshold: f64,
    /// Level increment applied when the threshold is crossed.
    pub curriculum_step: f64,
}

impl Default for CommandConfig {
    fn default() -> Self {
        CommandConfig {
            p_stand: 0.2,
            resample_interval: Span::new(4.0, 8.0),
            vx_range: Span::new(-1.0, 1.0),
            vy_range: Span::point(0.0),
            yaw_range: Span::point(0.0),
            curriculum_initial_scale: 0.2,
            curriculum_threshold: 0.7,
            curriculum_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationConfig {
    pub link_mass_scale: Span,
    /// Additive CoM offset along the link, meters.
    pub com_offset: Span,
    pub joint_stiffness_scale: Span,
    pub joint_damping_scale: Span,
    /// Dry friction torque, N·m.
    pub joint_dry_friction: Span,
    pub contact_friction: Span,
    /// Ground normal stiffness, N/m.
    pub contact_stiffness: Span,
    pub restitution: Span,
    /// Uniform sensor noise amplitude per channel group.
    pub noise_gravity: Span,
    pub noise_ang_vel: Span,
    pub noise_joint_pos: Span,
    pub noise_joint_vel: Span,
    /// Sensor-to-actuator delay, seconds.
    pub delay: Span,
    /// Seconds between scheduled pushes.
    pub push_interval: Span,
    /// Impulsive push velocity change, m/s.
    pub push_velocity: Span,
    /// Sustained push force, N.
    pub push_force: Span,
    /// Sustained push duration, s.
    pub push_duration: Span,
    /// Terrain slope, radians.
    pub terrain_slope: Span,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            link_mass_scale: Span::new(0.8, 1.2),
            com_offset: Span::new(-0.02, 0.02),
            joint_stiffness_scale: Span::new(0.9, 1.1),
            joint_damping_scale: Span::new(0.9, 1.1),
            joint_dry_friction: Span::new(0.0, 0.2),
            contact_friction: Span::new(0.5, 1.25),
            contact_stiffness: Span::new(8000.0, 16000.0),
            restitution: Span::new(0.0, 0.2),
            noise_gravity: Span::point(0.05),
            noise_ang_vel: Span::point(0.2),
            noise_joint_pos: Span::point(0.01),
            noise_joint_vel: Span::point(1.0),
            delay: Span::new(0.0, 0.02),
            push_interval: Span::new(4.0, 10.0),
            push_velocity: Span::new(0.1, 0.5),
            push_force: Span::new(10.0, 40.0),
            push_duration: Span::new(0.1, 0.5),
            terrain_slope: Span::point(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// "elu" or "tanh".
    pub activation: String,
    /// Per-joint scale applied to the [-1, 1] policy output, radians.
    pub action_scale: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            actor_hidden: vec![256, 128],
            critic_hidden: vec![256, 128],
            activation: "elu".to_string(),
            action_scale: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationConfig {
    /// Early termination when base height drops below this fraction of standing height.
    pub base_height_frac: f64,
    /// Early termination when base speed exceeds this, m/s.
    pub max_base_velocity: f64,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        TerminationConfig {
            base_height_frac: 0.4,
            max_base_velocity: 10.0,
        }
    }
}

/// Link/joint tables for the simulated robot. `None` selects the bundled
/// planar biped; explicit tables use the same schema the biped serializes to.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModelConfig {
    pub links: Option<Vec<LinkSpec>>,
    pub joints: Option<Vec<JointSpec>>,
    pub feet: Option<Vec<FootSpec>>,
    pub fixed_base: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    pub mass: f64,
    /// CoM offset in the link frame (x, z), meters.
    pub com: [f64; 2],
    /// Rotational inertia about the CoM, kg·m².
    pub inertia: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    /// Index of the parent link.
    pub parent: usize,
    /// Index of the child link.
    pub child: usize,
    /// Joint anchor in the parent link frame (x, z).
    pub anchor: [f64; 2],
    pub q_min: f64,
    pub q_max: f64,
    pub torque_limit: f64,
    /// Default joint position, radians.
    pub q_default: f64,
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootSpec {
    pub link: usize,
    /// Reference site in the link frame (x, z).
    pub offset: [f64; 2],
    /// Rear contact point in the link frame.
    pub heel: [f64; 2],
    /// Front contact point in the link frame.
    pub toe: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub num_envs: usize,
    /// Rollout length per PPO iteration, control steps.
    pub horizon_steps: usize,
    pub control_dt: f64,
    /// Physics/PD ticks per control step.
    pub physics_substeps: usize,
    pub max_episode_steps: usize,
    pub iterations: usize,
    pub checkpoint_interval: usize,
    pub robot: RobotModelConfig,
    pub rewards: RewardConfig,
    pub commands: CommandConfig,
    pub randomization: RandomizationConfig,
    pub termination: TerminationConfig,
    pub ppo: PpoHyperParams,
    pub network: NetworkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            num_envs: 64,
            horizon_steps: 24,
            control_dt: 0.02,
            physics_substeps: 20,
            max_episode_steps: 1500,
            iterations: 300,
            checkpoint_interval: 50,
            robot: RobotModelConfig::default(),
            rewards: RewardConfig::default(),
            commands: CommandConfig::default(),
            randomization: RandomizationConfig::default(),
            termination: TerminationConfig::default(),
            ppo: PpoHyperParams::default(),
            network: NetworkConfig::default(),
        }
    }
}

impl RunConfig {
    /// Physics integration step, seconds.
    pub fn physics_dt(&self) -> f64 {
        self.control_dt / self.physics_substeps as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, key: &str, message: &str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invariant {
                    key: key.to_string(),
                    message: message.to_string(),
                })
            }
        }

        check(self.num_envs > 0, "num_envs", "must be positive")?;
        check(self.horizon_steps > 0, "horizon_steps", "must be positive")?;
        check(self.control_dt > 0.0, "control_dt", "must be > 0")?;
        check(self.physics_substeps >= 1, "physics_substeps", "must be >= 1")?;
        check(
            self.max_episode_steps > 0,
            "max_episode_steps",
            "must be positive",
        )?;

        let p = &self.ppo;
        check((0.0..=1.0).contains(&p.gamma), "ppo.gamma", "must be in [0, 1]")?;
        check((0.0..=1.0).contains(&p.lam), "ppo.lam", "must be in [0, 1]")?;
        check(p.clip_eps > 0.0, "ppo.clip_eps", "must be > 0")?;
        check(p.c_value >= 0.0, "ppo.c_value", "must be >= 0")?;
        check(p.c_entropy >= 0.0, "ppo.c_entropy", "must be >= 0")?;
        check(p.learning_rate > 0.0, "ppo.learning_rate", "must be > 0")?;
        check(p.num_epochs > 0, "ppo.num_epochs", "must be positive")?;
        check(
            p.num_minibatches > 0,
            "ppo.num_minibatches",
            "must be positive",
        )?;
        check(p.max_grad_norm > 0.0, "ppo.max_grad_norm", "must be > 0")?;

        let r = &self.rewards;
        check(r.sigma_x > 0.0, "rewards.sigma_x", "must be > 0")?;
        check(r.sigma_y > 0.0, "rewards.sigma_y", "must be > 0")?;
        check(r.sigma_yaw > 0.0, "rewards.sigma_yaw", "must be > 0")?;
        check(r.h_des > 0.0, "rewards.h_des", "must be > 0")?;
        check(r.gait_frequency > 0.0, "rewards.gait_frequency", "must be > 0")?;

        let c = &self.commands;
        check(
            (0.0..=1.0).contains(&c.p_stand),
            "commands.p_stand",
            "must be in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&c.curriculum_initial_scale),
            "commands.curriculum_initial_scale",
            "must be in [0, 1]",
        )?;

        let rz = &self.randomization;
        let spans: [(&str, Span); 20] = [
            ("randomization.link_mass_scale", rz.link_mass_scale),
            ("randomization.com_offset", rz.com_offset),
            ("randomization.joint_stiffness_scale", rz.joint_stiffness_scale),
            ("randomization.joint_damping_scale", rz.joint_damping_scale),
            ("randomization.joint_dry_friction", rz.joint_dry_friction),
            ("randomization.contact_friction", rz.contact_friction),
            ("randomization.contact_stiffness", rz.contact_stiffness),
            ("randomization.restitution", rz.restitution),
            ("randomization.noise_gravity", rz.noise_gravity),
            ("randomization.noise_ang_vel", rz.noise_ang_vel),
            ("randomization.noise_joint_pos", rz.noise_joint_pos),
            ("randomization.noise_joint_vel", rz.noise_joint_vel),
            ("randomization.delay", rz.delay),
            ("randomization.push_interval", rz.push_interval),
            ("randomization.push_velocity", rz.push_velocity),
            ("randomization.push_force", rz.push_force),
            ("randomization.push_duration", rz.push_duration),
            ("randomization.terrain_slope", rz.terrain_slope),
            ("commands.resample_interval", c.resample_interval),
            ("commands.vx_range", c.vx_range),
        ];
        for (key, s) in spans {
            check(s.min <= s.max, key, "range must satisfy min <= max")?;
        }
        check(rz.delay.min >= 0.0, "randomization.delay", "must be >= 0")?;

        let n = &self.network;
        check(
            n.activation == "elu" || n.activation == "tanh",
            "network.activation",
            "must be \"elu\" or \"tanh\"",
        )?;
        check(n.action_scale > 0.0, "network.action_scale", "must be > 0")?;

        let t = &self.termination;
        check(
            t.base_height_frac > 0.0 && t.base_height_frac < 1.0,
            "termination.base_height_frac",
            "must be in (0, 1)",
        )?;
        check(
            t.max_base_velocity > 0.0,
            "termination.max_base_velocity",
            "must be > 0",
        )?;
        Ok(())
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }
}

/// Loads a config file, fills defaults, applies `LOCOGYM_SEED` when set, and
/// validates every invariant. An empty file yields the default profile.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Ok(seed) = std::env::var("LOCOGYM_SEED") {
        let seed: u64 = seed.parse().map_err(|_| ConfigError::Parse(format!(
            "LOCOGYM_SEED is not a valid u64: {seed:?}"
        )))?;
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses config text without touching the environment.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    if text.trim().is_empty() {
        return Ok(RunConfig::default());
    }
    let cfg: RunConfig =
        serde_yaml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    Ok(cfg)
}

/// Applies `key.path=value` overrides on top of a config, then re-validates.
/// Keys must resolve to existing fields; values parse as YAML scalars.
pub fn apply_overrides(
    cfg: &RunConfig,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let mut tree = serde_yaml::to_value(cfg).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for ov in overrides {
        let (key, raw) = ov.split_once('=').ok_or_else(|| ConfigError::BadOverride {
            key: ov.clone(),
            message: "expected key.path=value".to_string(),
        })?;
        let value: serde_yaml::Value =
            serde_yaml::from_str(raw).map_err(|e| ConfigError::BadOverride {
                key: key.to_string(),
                message: e.to_string(),
            })?;
        set_dotted(&mut tree, key, value)?;
    }
    let updated: RunConfig =
        serde_yaml::from_value(tree).map_err(|e| ConfigError::Parse(e.to_string()))?;
    updated.validate()?;
    Ok(updated)
}

fn set_dotted(
    tree: &mut serde_yaml::Value,
    key: &str,
    value: serde_yaml::Value,
) -> Result<(), ConfigError> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_mapping_mut()
            .ok_or_else(|| ConfigError::UnknownOverrideKey(key.to_string()))?;
        let entry = map
            .get_mut(serde_yaml::Value::String(part.to_string()))
            .ok_or_else(|| ConfigError::UnknownOverrideKey(key.to_string()))?;
        if i == parts.len() - 1 {
            *entry = value;
            return Ok(());
        }
        node = entry;
    }
    unreachable!("split always yields at least one part")
}
