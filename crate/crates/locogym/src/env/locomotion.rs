//! The vectorized planar-biped locomotion environment.
//!
//! Every env slot owns its model copy (domain randomization is drawn per
//! episode), its RNG stream, and its actuation delay line, so a batch of N
//! envs behaves identically to N independent single-env instances with the
//! matching seeds.

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RandomizationConfig, RunConfig};
use crate::dynamics::{
    apply_external_wrench, foot_states, forward_kinematics, substep, ActuatorConfig,
    ContactParams, ContactReport, FootState, PhysicsState, RobotModel,
};
use crate::env::{
    assemble_actor, assemble_critic, check_termination, compute_rewards, gait_indicator,
    resample_command, ActorInputs, CommandVector, DelayLine, GaitClock, NoiseAmplitudes,
    ObservationBundle, PrivilegedInputs, RewardBreakdown, RewardInputs, StepResult, Termination,
    VecEnv, NUM_REWARD_TERMS,
};

/// Seed stride between env slots, so each slot gets a well-separated stream
/// while remaining reproducible from the run seed alone.
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// One domain-randomization draw, fixed for the duration of an episode.
#[derive(Debug, Clone)]
pub struct RandomizationSample {
    pub mass_scale: f64,
    pub com_offset_x: f64,
    pub com_offset_z: f64,
    pub stiffness_scale: f64,
    pub damping_scale: f64,
    pub dry_friction: f64,
    pub contact_friction: f64,
    pub contact_stiffness: f64,
    pub restitution: f64,
    pub terrain_slope: f64,
    pub noise: NoiseAmplitudes,
    pub delay_s: f64,
    pub delay_ticks: u64,
}

impl RandomizationSample {
    pub fn draw(
        cfg: &RandomizationConfig,
        physics_dt: f64,
        rng: &mut impl Rng,
    ) -> RandomizationSample {
        let delay_s = cfg.delay.sample(rng);
        RandomizationSample {
            mass_scale: cfg.link_mass_scale.sample(rng),
            com_offset_x: cfg.com_offset.sample(rng),
            com_offset_z: cfg.com_offset.sample(rng),
            stiffness_scale: cfg.joint_stiffness_scale.sample(rng),
            damping_scale: cfg.joint_damping_scale.sample(rng),
            dry_friction: cfg.joint_dry_friction.sample(rng),
            contact_friction: cfg.contact_friction.sample(rng),
            contact_stiffness: cfg.contact_stiffness.sample(rng),
            restitution: cfg.restitution.sample(rng),
            terrain_slope: cfg.terrain_slope.sample(rng),
            noise: NoiseAmplitudes {
                gravity: cfg.noise_gravity.sample(rng),
                ang_vel: cfg.noise_ang_vel.sample(rng),
                joint_pos: cfg.noise_joint_pos.sample(rng),
                joint_vel: cfg.noise_joint_vel.sample(rng),
            },
            delay_s,
            delay_ticks: (delay_s / physics_dt).round() as u64,
        }
    }

    /// A draw with every range collapsed to its nominal value and no delay.
    pub fn nominal() -> RandomizationSample {
        RandomizationSample {
            mass_scale: 1.0,
            com_offset_x: 0.0,
            com_offset_z: 0.0,
            stiffness_scale: 1.0,
            damping_scale: 1.0,
            dry_friction: 0.0,
            contact_friction: 1.0,
            contact_stiffness: 12_000.0,
            restitution: 0.0,
            terrain_slope: 0.0,
            noise: NoiseAmplitudes::default(),
            delay_s: 0.0,
            delay_ticks: 0,
        }
    }
}

/// Applies a randomization draw to the nominal model.
pub fn randomized_model(base: &RobotModel, sample: &RandomizationSample) -> RobotModel {
    let mut m = base.clone();
    for l in &mut m.links {
        l.mass *= sample.mass_scale;
        l.inertia *= sample.mass_scale;
    }
    m.links[0].com += Vector2::new(sample.com_offset_x, sample.com_offset_z);
    m
}

/// Base height above flat ground at which the lowest foot contact point
/// touches, for the given joint pose.
pub fn standing_base_height(model: &RobotModel, q_joints: &DVector<f64>) -> f64 {
    let mut q = DVector::zeros(model.dof());
    for i in 0..q_joints.len() {
        q[3 + i] = q_joints[i];
    }
    let fk = forward_kinematics(model, &q);
    let mut lowest = f64::INFINITY;
    for f in &model.feet {
        for local in [f.heel, f.toe] {
            lowest = lowest.min(fk.point(model, f.link, local).y);
        }
    }
    -lowest
}

struct EnvSlot {
    model: RobotModel,
    actuator: ActuatorConfig,
    contact: ContactParams,
    state: PhysicsState,
    rng: ChaCha8Rng,
    sample: RandomizationSample,
    command: CommandVector,
    clock: GaitClock,
    delay: DelayLine,
    tick: u64,
    episode_step: usize,
    episode_time: f64,
    next_resample: f64,
    next_push: f64,
    push_impulsive: bool,
    prev_action: DVector<f64>,
    last_joint_vel: DVector<f64>,
    last_base_lin_vel: [f64; 2],
    last_pitch_rate: f64,
    /// Nominal standing height of this slot's model (termination reference).
    stand_height: f64,
    total_mass: f64,
    curriculum_level: f64,
    tracking_ma: f64,
    obs: ObservationBundle,
}

pub struct LocomotionEnv {
    cfg: RunConfig,
    base_model: RobotModel,
    slots: Vec<EnvSlot>,
    n_joints: usize,
}

impl LocomotionEnv {
    pub fn new(cfg: &RunConfig) -> anyhow::Result<LocomotionEnv> {
        cfg.validate()?;
        let base_model = RobotModel::from_config(&cfg.robot)?;
        base_model.validate()?;
        anyhow::ensure!(
            base_model.feet.len() == 2,
            "locomotion env needs exactly two feet, model has {}",
            base_model.feet.len()
        );
        let n_joints = base_model.num_joints();
        let mut env = LocomotionEnv {
            cfg: cfg.clone(),
            base_model,
            slots: Vec::new(),
            n_joints,
        };
        for i in 0..cfg.num_envs {
            let rng = ChaCha8Rng::seed_from_u64(
                cfg.seed.wrapping_add((i as u64).wrapping_mul(SEED_STRIDE)),
            );
            env.slots.push(env.make_slot(rng));
        }
        Ok(env)
    }

    fn make_slot(&self, rng: ChaCha8Rng) -> EnvSlot {
        let n = self.n_joints;
        let mut slot = EnvSlot {
            model: self.base_model.clone(),
            actuator: ActuatorConfig::from_model(&self.base_model),
            contact: ContactParams::default(),
            state: PhysicsState::new(&self.base_model, Vector2::zeros(), 0.0),
            rng,
            sample: RandomizationSample::nominal(),
            command: CommandVector::stand(),
            clock: GaitClock::new(self.cfg.rewards.gait_frequency),
            delay: DelayLine::new(self.base_model.default_joint_positions()),
            tick: 0,
            episode_step: 0,
            episode_time: 0.0,
            next_resample: 0.0,
            next_push: 0.0,
            push_impulsive: true,
            prev_action: DVector::zeros(n),
            last_joint_vel: DVector::zeros(n),
            last_base_lin_vel: [0.0; 2],
            last_pitch_rate: 0.0,
            stand_height: 0.0,
            total_mass: 0.0,
            curriculum_level: 0.0,
            tracking_ma: 0.0,
            obs: ObservationBundle {
                actor: DVector::zeros(0),
                critic: DVector::zeros(0),
            },
        };
        self.reset_slot(&mut slot);
        slot
    }

    fn reset_slot(&self, slot: &mut EnvSlot) {
        let cfg = &self.cfg;
        let sample = RandomizationSample::draw(&cfg.randomization, cfg.physics_dt(), &mut slot.rng);
        let model = randomized_model(&self.base_model, &sample);
        let mut actuator = ActuatorConfig::from_model(&model);
        actuator.kp *= sample.stiffness_scale;
        actuator.kd *= sample.damping_scale;
        actuator.dry_friction.fill(sample.dry_friction);
        let contact = ContactParams {
            slope: sample.terrain_slope,
            friction: sample.contact_friction,
            stiffness: sample.contact_stiffness,
            restitution: sample.restitution,
            ..ContactParams::default()
        };

        // start from the default pose with small joint noise, feet touching
        let q_default = model.default_joint_positions();
        let q_start = DVector::from_fn(self.n_joints, |i, _| {
            (q_default[i] + slot.rng.gen_range(-0.05..=0.05))
                .clamp(model.joints[i].q_min, model.joints[i].q_max)
        });
        let base_z = standing_base_height(&model, &q_start) + contact.ground_height(0.0);
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, base_z), 0.0);
        for i in 0..self.n_joints {
            state.q_gen[3 + i] = q_start[i];
        }

        slot.stand_height = standing_base_height(&model, &q_default);
        slot.total_mass = model.total_mass();
        slot.command = resample_command(&cfg.commands, slot.curriculum_level, &mut slot.rng);
        slot.clock = GaitClock::new(cfg.rewards.gait_frequency);
        slot.clock.active = !slot.command.stand_still;
        slot.delay.reset(q_default);
        slot.episode_step = 0;
        slot.episode_time = 0.0;
        slot.next_resample = cfg.commands.resample_interval.sample(&mut slot.rng);
        slot.next_push = cfg.randomization.push_interval.sample(&mut slot.rng);
        slot.push_impulsive = true;
        slot.prev_action = DVector::zeros(self.n_joints);
        slot.last_joint_vel = DVector::zeros(self.n_joints);
        slot.last_base_lin_vel = [0.0; 2];
        slot.last_pitch_rate = 0.0;
        slot.model = model;
        slot.actuator = actuator;
        slot.contact = contact;
        slot.state = state;
        slot.sample = sample;
        slot.obs = Self::observe(slot);
    }

    /// Current observation for a slot; actor noise is drawn from the slot RNG.
    fn observe(slot: &mut EnvSlot) -> ObservationBundle {
        let pitch = slot.state.q_gen[2];
        let q_default = slot.model.default_joint_positions();
        let inputs = ActorInputs {
            commands: slot.command.as_array(),
            gait: slot.clock.observation(),
            gravity: [pitch.sin(), 0.0, -pitch.cos()],
            angular_velocity: [0.0, slot.state.v_gen[2], 0.0],
            joint_pos: slot.state.joint_positions() - q_default,
            joint_vel: slot.state.joint_velocities(),
            prev_action: slot.prev_action.clone(),
        };
        let rng = &mut slot.rng;
        let actor = assemble_actor(&inputs, &slot.sample.noise, |amp| {
            if amp > 0.0 {
                rng.gen_range(-amp..=amp)
            } else {
                0.0
            }
        });
        let base_height =
            slot.state.q_gen[1] - slot.contact.ground_height(slot.state.q_gen[0]);
        let privileged = PrivilegedInputs {
            body_mass: slot.total_mass,
            body_com: [slot.sample.com_offset_x, 0.0, slot.sample.com_offset_z],
            base_lin_vel: [slot.state.v_gen[0], 0.0, slot.state.v_gen[1]],
            base_height,
            push_force: [slot.state.ext_force.x, slot.state.ext_force.y],
            push_torque: [0.0, slot.state.ext_torque, 0.0],
        };
        let critic = assemble_critic(&inputs, &privileged);
        ObservationBundle { actor, critic }
    }

    fn maybe_push(cfg: &RunConfig, slot: &mut EnvSlot) {
        if slot.episode_time < slot.next_push {
            return;
        }
        let rz = &cfg.randomization;
        let sign = if slot.rng.gen::<bool>() { 1.0 } else { -1.0 };
        if slot.push_impulsive {
            let dv = sign * rz.push_velocity.sample(&mut slot.rng);
            let _ = apply_external_wrench(
                &slot.model,
                &mut slot.state,
                Vector2::new(dv * slot.total_mass, 0.0),
                0.0,
                0.0,
            );
        } else {
            let f = sign * rz.push_force.sample(&mut slot.rng);
            let dur = rz.push_duration.sample(&mut slot.rng);
            let _ = apply_external_wrench(
                &slot.model,
                &mut slot.state,
                Vector2::new(f, 0.0),
                0.0,
                dur,
            );
        }
        slot.push_impulsive = !slot.push_impulsive;
        slot.next_push = slot.episode_time + rz.push_interval.sample(&mut slot.rng);
    }

    fn reward_inputs(
        cfg: &RunConfig,
        slot: &EnvSlot,
        action: &DVector<f64>,
        tau_mean: &DVector<f64>,
        feet: &[FootState],
        report: &ContactReport,
    ) -> RewardInputs {
        let v = &slot.state.v_gen;
        let dt = cfg.control_dt;
        let pitch = slot.state.q_gen[2];
        let qd = slot.state.joint_velocities();
        let n = qd.len();
        let gait = gait_indicator(
            slot.clock.phase,
            slot.clock.active,
            [feet[0].height, feet[1].height],
            cfg.rewards.swing_height_threshold,
        );
        RewardInputs {
            command: slot.command.as_array(),
            stand_still: slot.command.stand_still,
            base_lin_vel: [v[0], 0.0, v[1]],
            base_ang_vel: [0.0, v[2], 0.0],
            base_height: slot.state.q_gen[1] - slot.contact.ground_height(slot.state.q_gen[0]),
            gravity: [pitch.sin(), 0.0, -pitch.cos()],
            base_lin_acc: [
                (v[0] - slot.last_base_lin_vel[0]) / dt,
                0.0,
                (v[1] - slot.last_base_lin_vel[1]) / dt,
            ],
            base_ang_acc: [0.0, (v[2] - slot.last_pitch_rate) / dt, 0.0],
            torques: tau_mean.clone(),
            torque_limits: slot.actuator.torque_limit.clone(),
            joint_pos: slot.state.joint_positions(),
            joint_vel: qd.clone(),
            joint_acc: (&qd - &slot.last_joint_vel) / dt,
            joint_lower: DVector::from_iterator(n, slot.model.joints.iter().map(|j| j.q_min)),
            joint_upper: DVector::from_iterator(n, slot.model.joints.iter().map(|j| j.q_max)),
            action: action.clone(),
            prev_action: slot.prev_action.clone(),
            swing_expected: [gait[0].0, gait[1].0],
            swinging: [gait[0].1, gait[1].1],
            stance: [feet[0].in_contact, feet[1].in_contact],
            foot_vel: [
                [feet[0].velocity.x, feet[0].velocity.y],
                [feet[1].velocity.x, feet[1].velocity.y],
            ],
            foot_pitch_rel: [feet[0].pitch - pitch, feet[1].pitch - pitch],
            feet_distance: (feet[0].position - feet[1].position).norm(),
            n_collision: report.n_collision,
        }
    }

    fn step_slot(&self, slot: &mut EnvSlot, action: &DVector<f64>) -> StepResult {
        let cfg = &self.cfg;
        let n = self.n_joints;
        assert_eq!(action.len(), n, "action dimension mismatch");

        // a non-finite action cannot be simulated; end the episode
        if !action.iter().all(|a| a.is_finite()) {
            let obs = slot.obs.clone();
            let episode_step = slot.episode_step + 1;
            self.reset_slot(slot);
            return StepResult {
                obs,
                reward: 0.0,
                breakdown: RewardBreakdown {
                    terms: [0.0; NUM_REWARD_TERMS],
                },
                done: true,
                timeout: false,
                truncation: false,
                episode_step,
            };
        }

        let a = action.map(|v| v.clamp(-1.0, 1.0));
        let q_des = slot.model.default_joint_positions() + cfg.network.action_scale * &a;
        slot.delay.push(slot.tick, slot.sample.delay_ticks, q_des);

        Self::maybe_push(cfg, slot);

        let dt = cfg.physics_dt();
        let mut tau_sum = DVector::zeros(n);
        let mut blew_up = false;
        for _ in 0..cfg.physics_substeps {
            let q_active = slot.delay.active(slot.tick).clone();
            match substep(
                &slot.model,
                &mut slot.state,
                &q_active,
                &slot.actuator,
                &slot.contact,
                dt,
            ) {
                Ok(tau) => tau_sum += tau,
                Err(_) => {
                    blew_up = true;
                    break;
                }
            }
            slot.tick += 1;
        }

        slot.episode_step += 1;
        slot.episode_time += cfg.control_dt;

        let (reward, breakdown, term) = if blew_up {
            (
                0.0,
                RewardBreakdown {
                    terms: [0.0; NUM_REWARD_TERMS],
                },
                Termination::Early,
            )
        } else {
            let tau_mean = &tau_sum / cfg.physics_substeps as f64;
            let (feet, report) = foot_states(&slot.model, &slot.state, &slot.contact);
            let inputs = Self::reward_inputs(cfg, slot, &a, &tau_mean, &feet, &report);
            let (reward, breakdown) = compute_rewards(&inputs, &cfg.rewards);
            let base_height = inputs.base_height;
            let base_speed = (slot.state.v_gen[0].powi(2) + slot.state.v_gen[1].powi(2)).sqrt();
            let term = check_termination(
                base_height,
                base_speed,
                slot.episode_step,
                cfg.termination.base_height_frac * slot.stand_height,
                cfg.termination.max_base_velocity,
                cfg.max_episode_steps,
            );

            // curriculum: per-env moving average of the x-tracking row while a
            // motion command is active
            if !slot.command.stand_still {
                slot.tracking_ma = 0.99 * slot.tracking_ma + 0.01 * breakdown.terms[1];
                if slot.tracking_ma > cfg.commands.curriculum_threshold
                    && slot.curriculum_level < 1.0
                {
                    slot.curriculum_level =
                        (slot.curriculum_level + cfg.commands.curriculum_step).min(1.0);
                    slot.tracking_ma = 0.0;
                }
            }
            (reward, breakdown, term)
        };

        // book-keeping for the next step's finite differences and action rate
        slot.prev_action = a;
        slot.last_joint_vel = slot.state.joint_velocities();
        slot.last_base_lin_vel = [slot.state.v_gen[0], slot.state.v_gen[1]];
        slot.last_pitch_rate = slot.state.v_gen[2];
        slot.clock.advance(cfg.control_dt);

        // the observation returned to the caller reflects the pre-resample
        // command, so a truncation boundary bootstraps from the right state
        let result_obs = if blew_up { slot.obs.clone() } else { Self::observe(slot) };
        slot.obs = result_obs.clone();
        let episode_step = slot.episode_step;

        let (done, timeout) = match term {
            Termination::Early => (true, false),
            Termination::Timeout => (true, true),
            Termination::Running => (false, false),
        };
        let mut truncation = false;
        if done {
            self.reset_slot(slot);
        } else if slot.episode_time >= slot.next_resample {
            let new_command =
                resample_command(&cfg.commands, slot.curriculum_level, &mut slot.rng);
            truncation = new_command != slot.command;
            slot.command = new_command;
            slot.clock.active = !slot.command.stand_still;
            slot.next_resample =
                slot.episode_time + cfg.commands.resample_interval.sample(&mut slot.rng);
            slot.obs = Self::observe(slot);
        }

        StepResult {
            obs: result_obs,
            reward,
            breakdown,
            done,
            timeout,
            truncation,
            episode_step,
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn num_joints(&self) -> usize {
        self.n_joints
    }

    pub fn physics_state(&self, i: usize) -> &PhysicsState {
        &self.slots[i].state
    }

    pub fn command_of(&self, i: usize) -> CommandVector {
        self.slots[i].command
    }

    pub fn episode_step_of(&self, i: usize) -> usize {
        self.slots[i].episode_step
    }

    pub fn randomization_of(&self, i: usize) -> &RandomizationSample {
        &self.slots[i].sample
    }

    /// Mean per-env curriculum level, for training metrics.
    pub fn mean_curriculum_level(&self) -> f64 {
        self.slots.iter().map(|s| s.curriculum_level).sum::<f64>() / self.slots.len() as f64
    }

    /// Pins every slot to a fixed command; useful for evaluation runs.
    pub fn set_commands(&mut self, command: CommandVector) {
        for slot in &mut self.slots {
            slot.command = command;
            slot.clock.active = !command.stand_still;
            slot.next_resample = f64::INFINITY;
            slot.obs = Self::observe(slot);
        }
    }
}

impl VecEnv for LocomotionEnv {
    fn num_envs(&self) -> usize {
        self.slots.len()
    }

    fn actor_dim(&self) -> usize {
        crate::env::actor_dim(self.n_joints)
    }

    fn critic_dim(&self) -> usize {
        crate::env::critic_dim(self.n_joints)
    }

    fn action_dim(&self) -> usize {
        self.n_joints
    }

    fn reset_all(&mut self) -> Vec<ObservationBundle> {
        let mut slots = std::mem::take(&mut self.slots);
        for slot in &mut slots {
            self.reset_slot(slot);
        }
        self.slots = slots;
        self.observations()
    }

    fn observations(&self) -> Vec<ObservationBundle> {
        self.slots.iter().map(|s| s.obs.clone()).collect()
    }

    fn step(&mut self, actions: &[DVector<f64>]) -> Vec<StepResult> {
        assert_eq!(actions.len(), self.slots.len(), "one action per env");
        let mut slots = std::mem::take(&mut self.slots);
        let results = slots
            .iter_mut()
            .zip(actions)
            .map(|(slot, a)| self.step_slot(slot, a))
            .collect();
        self.slots = slots;
        results
    }

    fn curriculum_level(&self) -> f64 {
        self.mean_curriculum_level()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.num_envs = 2;
        cfg
    }

    fn zero_actions(env: &LocomotionEnv) -> Vec<DVector<f64>> {
        vec![DVector::zeros(env.action_dim()); env.num_envs()]
    }

    #[test]
    fn planar_dims() {
        let env = LocomotionEnv::new(&small_cfg()).unwrap();
        assert_eq!(env.action_dim(), 6);
        assert_eq!(env.actor_dim(), 29);
        assert_eq!(env.critic_dim(), 42);
        for o in env.observations() {
            assert_eq!(o.actor.len(), 29);
            assert_eq!(o.critic.len(), 42);
            assert!(o.actor.iter().all(|v| v.is_finite()));
            assert!(o.critic.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn starts_near_standing_height() {
        let env = LocomotionEnv::new(&small_cfg()).unwrap();
        for i in 0..env.num_envs() {
            let z = env.physics_state(i).q_gen[1];
            assert!((z - 0.68).abs() < 0.1, "start height {z}");
        }
    }

    #[test]
    fn zero_action_steps_stay_finite_and_nonnegative() {
        let mut env = LocomotionEnv::new(&small_cfg()).unwrap();
        for _ in 0..50 {
            let results = env.step(&zero_actions(&env));
            for r in &results {
                assert!(r.reward >= 0.0);
                assert!(r.obs.actor.iter().all(|v| v.is_finite()));
                assert!(r.obs.critic.iter().all(|v| v.is_finite()));
            }
        }
        for i in 0..env.num_envs() {
            assert!(env.physics_state(i).is_finite());
        }
    }

    #[test]
    fn identical_seeds_are_bitwise_identical() {
        let cfg = small_cfg();
        let mut a = LocomotionEnv::new(&cfg).unwrap();
        let mut b = LocomotionEnv::new(&cfg).unwrap();
        for _ in 0..10 {
            let ra = a.step(&zero_actions(&a));
            let rb = b.step(&zero_actions(&b));
            for (x, y) in ra.iter().zip(&rb) {
                assert_eq!(x.obs.actor, y.obs.actor);
                assert_eq!(x.obs.critic, y.obs.critic);
                assert_eq!(x.reward, y.reward);
                assert_eq!(x.done, y.done);
            }
        }
    }

    #[test]
    fn batch_slot_matches_single_env_with_offset_seed() {
        let mut batch_cfg = small_cfg();
        batch_cfg.num_envs = 3;
        let mut batch = LocomotionEnv::new(&batch_cfg).unwrap();

        let mut single_cfg = small_cfg();
        single_cfg.num_envs = 1;
        single_cfg.seed = batch_cfg.seed.wrapping_add(2u64.wrapping_mul(SEED_STRIDE));
        let mut single = LocomotionEnv::new(&single_cfg).unwrap();

        assert_eq!(
            batch.observations()[2].actor,
            single.observations()[0].actor
        );
        for _ in 0..8 {
            let rb = batch.step(&zero_actions(&batch));
            let rs = single.step(&zero_actions(&single));
            assert_eq!(rb[2].obs.actor, rs[0].obs.actor);
            assert_eq!(rb[2].obs.critic, rs[0].obs.critic);
            assert_eq!(rb[2].reward, rs[0].reward);
        }
    }

    #[test]
    fn hard_push_terminates_and_resets() {
        let mut cfg = small_cfg();
        cfg.num_envs = 1;
        let mut env = LocomotionEnv::new(&cfg).unwrap();
        // slam the base sideways far beyond the velocity bound
        let model = env.slots[0].model.clone();
        apply_external_wrench(
            &model,
            &mut env.slots[0].state,
            Vector2::new(1e4, 0.0),
            0.0,
            0.0,
        )
        .unwrap();
        let r = env.step(&zero_actions(&env));
        assert!(r[0].done);
        assert!(!r[0].timeout);
        // auto-reset: episode counter back to zero, fresh finite obs
        assert_eq!(env.episode_step_of(0), 0);
        assert!(env.observations()[0].actor.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_finite_action_ends_episode() {
        let mut cfg = small_cfg();
        cfg.num_envs = 1;
        let mut env = LocomotionEnv::new(&cfg).unwrap();
        let mut a = DVector::zeros(env.action_dim());
        a[0] = f64::NAN;
        let r = env.step(&[a]);
        assert!(r[0].done);
        assert!(env.physics_state(0).is_finite());
    }

    #[test]
    fn delay_draw_within_twenty_physics_ticks() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let s = RandomizationSample::draw(&cfg.randomization, cfg.physics_dt(), &mut rng);
            assert!(s.delay_ticks <= 20, "delay {} ticks", s.delay_ticks);
        }
    }

    #[test]
    fn timeout_flag_on_step_limit() {
        let mut cfg = small_cfg();
        cfg.num_envs = 1;
        cfg.max_episode_steps = 5;
        let mut env = LocomotionEnv::new(&cfg).unwrap();
        let mut saw_timeout = false;
        for _ in 0..5 {
            let r = env.step(&zero_actions(&env));
            if r[0].done {
                assert!(r[0].timeout);
                assert_eq!(r[0].episode_step, 5);
                saw_timeout = true;
            }
        }
        assert!(saw_timeout);
    }
}
