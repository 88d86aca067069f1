//! Planar floating-base dynamics: dense joint-space inertia assembly from
//! per-link Jacobians, penalty ground contacts with a Coulomb cap, PD torque
//! actuation, and semi-implicit Euler integration.

use nalgebra::{DMatrix, DVector, Vector2};

use super::model::RobotModel;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("mass matrix is singular")]
    SingularMassMatrix,
    #[error("state became non-finite at t={0}")]
    NonFiniteState(f64),
}

/// Ground-truth simulator state in generalized coordinates
/// `[base_x, base_z, pitch, q_joints...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsState {
    pub q_gen: DVector<f64>,
    pub v_gen: DVector<f64>,
    pub time: f64,
    /// Sustained external force on the base, world frame, N.
    pub ext_force: Vector2<f64>,
    /// Sustained external torque on the base, N·m.
    pub ext_torque: f64,
    /// Remaining duration of the sustained wrench, s.
    pub ext_time_left: f64,
}

impl PhysicsState {
    pub fn new(model: &RobotModel, base_pos: Vector2<f64>, pitch: f64) -> PhysicsState {
        let dof = model.dof();
        let mut q = DVector::zeros(dof);
        q[0] = base_pos.x;
        q[1] = base_pos.y;
        q[2] = pitch;
        for (i, j) in model.joints.iter().enumerate() {
            q[3 + i] = j.q_default;
        }
        PhysicsState {
            q_gen: q,
            v_gen: DVector::zeros(dof),
            time: 0.0,
            ext_force: Vector2::zeros(),
            ext_torque: 0.0,
            ext_time_left: 0.0,
        }
    }

    pub fn joint_positions(&self) -> DVector<f64> {
        self.q_gen.rows(3, self.q_gen.len() - 3).into_owned()
    }

    pub fn joint_velocities(&self) -> DVector<f64> {
        self.v_gen.rows(3, self.v_gen.len() - 3).into_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.q_gen.iter().all(|v| v.is_finite()) && self.v_gen.iter().all(|v| v.is_finite())
    }
}

/// Per-joint PD gains, dry friction, and torque limits.
#[derive(Debug, Clone)]
pub struct ActuatorConfig {
    pub kp: DVector<f64>,
    pub kd: DVector<f64>,
    pub dry_friction: DVector<f64>,
    pub torque_limit: DVector<f64>,
}

impl ActuatorConfig {
    pub fn from_model(model: &RobotModel) -> ActuatorConfig {
        let n = model.num_joints();
        ActuatorConfig {
            kp: DVector::from_iterator(n, model.joints.iter().map(|j| j.kp)),
            kd: DVector::from_iterator(n, model.joints.iter().map(|j| j.kd)),
            dry_friction: DVector::zeros(n),
            torque_limit: DVector::from_iterator(
                n,
                model.joints.iter().map(|j| j.torque_limit),
            ),
        }
    }
}

/// Penalty contact parameters over a linear slope through the origin.
#[derive(Debug, Clone)]
pub struct ContactParams {
    /// Terrain slope, radians; ground height is `x * tan(slope)`.
    pub slope: f64,
    pub friction: f64,
    /// Normal stiffness, N/m.
    pub stiffness: f64,
    /// Normal damping, N·s/m.
    pub damping: f64,
    /// Tangential damping used below the Coulomb cap, N·s/m.
    pub tangential_damping: f64,
    pub restitution: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            slope: 0.0,
            friction: 1.0,
            stiffness: 12000.0,
            damping: 300.0,
            tangential_damping: 1000.0,
            restitution: 0.0,
        }
    }
}

impl ContactParams {
    pub fn ground_height(&self, x: f64) -> f64 {
        x * self.slope.tan()
    }

    fn normal(&self) -> Vector2<f64> {
        Vector2::new(-self.slope.sin(), self.slope.cos())
    }

    fn tangent(&self) -> Vector2<f64> {
        Vector2::new(self.slope.cos(), self.slope.sin())
    }
}

/// Foot kinematics and contact status for the reward machinery.
#[derive(Debug, Clone)]
pub struct FootState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Foot link pitch in the world frame, radians.
    pub pitch: f64,
    /// Vertical height of the contact site above local ground, m.
    pub height: f64,
    pub in_contact: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ContactReport {
    /// World-frame contact force per foot, N.
    pub foot_forces: Vec<Vector2<f64>>,
    /// Count of non-foot bodies in ground contact.
    pub n_collision: usize,
}

/// Rotates a link-local vector into the world frame; positive pitch tips the
/// local +z axis toward +x.
pub fn rot(angle: f64, v: Vector2<f64>) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(v.x * c + v.y * s, -v.x * s + v.y * c)
}

/// Derivative of `rot` with respect to the angle, applied to a world vector.
fn perp(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(v.y, -v.x)
}

/// Forward-kinematics cache: world pose of every link frame and joint anchor.
pub struct ForwardKin {
    /// World orientation per link.
    pub link_angle: Vec<f64>,
    /// World position of each link frame origin.
    pub link_origin: Vec<Vector2<f64>>,
    /// World CoM position per link.
    pub link_com: Vec<Vector2<f64>>,
    /// World position of each joint anchor.
    pub joint_anchor: Vec<Vector2<f64>>,
    /// Joints on the path to each link.
    pub paths: Vec<Vec<usize>>,
    /// Parent link per joint.
    joint_parent: Vec<usize>,
}

pub fn forward_kinematics(model: &RobotModel, q: &DVector<f64>) -> ForwardKin {
    let nl = model.links.len();
    let nj = model.joints.len();
    let base = Vector2::new(q[0], q[1]);
    let mut link_angle = vec![0.0; nl];
    let mut link_origin = vec![Vector2::zeros(); nl];
    let mut joint_anchor = vec![Vector2::zeros(); nj];
    link_angle[0] = q[2];
    link_origin[0] = base;
    for (j, joint) in model.joints.iter().enumerate() {
        let parent = joint.parent;
        let anchor = link_origin[parent] + rot(link_angle[parent], joint.anchor);
        joint_anchor[j] = anchor;
        link_angle[joint.child] = link_angle[parent] + q[3 + j];
        link_origin[joint.child] = anchor;
    }
    let link_com = model
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| link_origin[i] + rot(link_angle[i], l.com))
        .collect();
    let paths = (0..nl).map(|i| model.path_to(i)).collect();
    ForwardKin {
        link_angle,
        link_origin,
        link_com,
        joint_anchor,
        paths,
        joint_parent: model.joints.iter().map(|j| j.parent).collect(),
    }
}

impl ForwardKin {
    /// World position of a point fixed in `link`.
    pub fn point(&self, model: &RobotModel, link: usize, local: Vector2<f64>) -> Vector2<f64> {
        let _ = model;
        self.link_origin[link] + rot(self.link_angle[link], local)
    }

    /// Translational Jacobian columns of a world point on `link`; `dof`-sized.
    fn point_jacobian(&self, link: usize, p: Vector2<f64>, dof: usize) -> Vec<Vector2<f64>> {
        let mut cols = vec![Vector2::zeros(); dof];
        cols[0] = Vector2::new(1.0, 0.0);
        cols[1] = Vector2::new(0.0, 1.0);
        cols[2] = perp(p - self.link_origin[0]);
        for &j in &self.paths[link] {
            cols[3 + j] = perp(p - self.joint_anchor[j]);
        }
        cols
    }

    fn point_velocity(&self, link: usize, p: Vector2<f64>, v_gen: &DVector<f64>) -> Vector2<f64> {
        let mut v = Vector2::new(v_gen[0], v_gen[1]);
        v += perp(p - self.link_origin[0]) * v_gen[2];
        for &j in &self.paths[link] {
            v += perp(p - self.joint_anchor[j]) * v_gen[3 + j];
        }
        v
    }

    /// Angular velocity of `link`.
    fn link_omega(&self, link: usize, v_gen: &DVector<f64>) -> f64 {
        let mut w = v_gen[2];
        for &j in &self.paths[link] {
            w += v_gen[3 + j];
        }
        w
    }

    /// Bias (zero-acceleration) linear acceleration of a point on `link`:
    /// the velocity-product terms of the point acceleration.
    fn point_bias_accel(
        &self,
        link: usize,
        p: Vector2<f64>,
        v_p: Vector2<f64>,
        v_gen: &DVector<f64>,
    ) -> Vector2<f64> {
        let _ = p;
        let v_base = Vector2::new(v_gen[0], v_gen[1]);
        let mut a = perp(v_p - v_base) * v_gen[2];
        for &j in &self.paths[link] {
            // the anchor is fixed in the parent link
            let v_anchor = self.point_velocity(self.joint_parent[j], self.joint_anchor[j], v_gen);
            a += perp(v_p - v_anchor) * v_gen[3 + j];
        }
        a
    }
}

/// One resolved contact point: generalized force contribution and report data.
struct ContactPoint {
    force: Vector2<f64>,
    link: usize,
    point: Vector2<f64>,
}

fn resolve_contacts(
    model: &RobotModel,
    fk: &ForwardKin,
    v_gen: &DVector<f64>,
    contact: &ContactParams,
) -> (Vec<ContactPoint>, ContactReport) {
    let normal = contact.normal();
    let tangent = contact.tangent();
    let foot_links: Vec<usize> = model.feet.iter().map(|f| f.link).collect();
    let mut points = Vec::new();
    let mut report = ContactReport {
        foot_forces: vec![Vector2::zeros(); model.feet.len()],
        n_collision: 0,
    };

    let mut eval = |link: usize, local: Vector2<f64>| -> Option<(Vector2<f64>, Vector2<f64>)> {
        let p = fk.point(model, link, local);
        // signed distance to the slope plane; positive below ground
        let depth = -(normal.dot(&p));
        if depth <= 0.0 {
            return None;
        }
        let v = fk.point_velocity(link, p, v_gen);
        let v_n = normal.dot(&v);
        let damping = if v_n > 0.0 {
            contact.damping * (1.0 - contact.restitution)
        } else {
            contact.damping
        };
        let n_force = (contact.stiffness * depth - damping * v_n).max(0.0);
        let v_t = tangent.dot(&v);
        let cap = contact.friction * n_force;
        let t_force = (-contact.tangential_damping * v_t).clamp(-cap, cap);
        Some((p, normal * n_force + tangent * t_force))
    };

    for (fi, foot) in model.feet.iter().enumerate() {
        for local in [foot.heel, foot.toe] {
            if let Some((p, f)) = eval(foot.link, local) {
                report.foot_forces[fi] += f;
                points.push(ContactPoint {
                    force: f,
                    link: foot.link,
                    point: p,
                });
            }
        }
    }
    for (li, link) in model.links.iter().enumerate() {
        if foot_links.contains(&li) {
            continue;
        }
        let mut hit = false;
        for local in [Vector2::zeros(), link.tip] {
            if let Some((p, f)) = eval(li, local) {
                hit = true;
                points.push(ContactPoint {
                    force: f,
                    link: li,
                    point: p,
                });
            }
        }
        if hit {
            report.n_collision += 1;
        }
    }
    (points, report)
}

/// PD torque per the joint-space control law:
/// `clamp(kp (q_des - q) - kd q̇ - friction sign(q̇), ±τ_max)`.
pub fn pd_torque(
    cfg: &ActuatorConfig,
    q_des: &DVector<f64>,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    let n = cfg.kp.len();
    for (len, _) in [(q_des.len(), "q_des"), (q.len(), "q"), (qdot.len(), "qdot")] {
        if len != n {
            return Err(DynamicsError::Dimension { expected: n, got: len });
        }
    }
    let mut tau = DVector::zeros(n);
    for i in 0..n {
        let raw = cfg.kp[i] * (q_des[i] - q[i]) - cfg.kd[i] * qdot[i]
            - cfg.dry_friction[i] * qdot[i].signum();
        tau[i] = raw.clamp(-cfg.torque_limit[i], cfg.torque_limit[i]);
    }
    Ok(tau)
}

/// Joint-space inertia matrix and bias force (Coriolis + gravity), assembled
/// from per-link CoM Jacobians: `M = Σ m Jᵀ J + I w wᵀ`.
pub fn mass_matrix_and_bias(
    model: &RobotModel,
    state: &PhysicsState,
) -> (DMatrix<f64>, DVector<f64>) {
    let dof = model.dof();
    let fk = forward_kinematics(model, &state.q_gen);
    let mut mass = DMatrix::zeros(dof, dof);
    let mut bias = DVector::zeros(dof);
    let gravity = Vector2::new(0.0, -GRAVITY);

    for (li, link) in model.links.iter().enumerate() {
        if model.fixed_base && li == 0 {
            continue;
        }
        let com = fk.link_com[li];
        let cols = fk.point_jacobian(li, com, dof);
        let mut w = DVector::zeros(dof);
        w[2] = 1.0;
        for &j in &fk.paths[li] {
            w[3 + j] = 1.0;
        }
        for a in 0..dof {
            for b in a..dof {
                let m = link.mass * cols[a].dot(&cols[b]) + link.inertia * w[a] * w[b];
                mass[(a, b)] += m;
                if a != b {
                    mass[(b, a)] += m;
                }
            }
        }
        let v_com = fk.point_velocity(li, com, &state.v_gen);
        let a0 = fk.point_bias_accel(li, com, v_com, &state.v_gen);
        // angular bias acceleration is zero for planar chains with q̈ = 0
        let f = (a0 - gravity) * link.mass;
        for d in 0..dof {
            bias[d] += cols[d].dot(&f);
        }
    }
    if model.fixed_base {
        for d in 0..3 {
            mass[(d, d)] += 1.0;
        }
    }
    (mass, bias)
}

/// Generalized acceleration from `M a = τ_total - bias` with penalty contact
/// forces and any registered external wrench included in `τ_total`.
pub fn forward_dynamics(
    model: &RobotModel,
    state: &PhysicsState,
    joint_torques: &DVector<f64>,
    contact: &ContactParams,
) -> Result<DVector<f64>, DynamicsError> {
    let dof = model.dof();
    if joint_torques.len() != model.num_joints() {
        return Err(DynamicsError::Dimension {
            expected: model.num_joints(),
            got: joint_torques.len(),
        });
    }
    let fk = forward_kinematics(model, &state.q_gen);
    let (mass, bias) = mass_matrix_and_bias(model, state);

    let mut rhs = -bias;
    for (j, tau) in joint_torques.iter().enumerate() {
        rhs[3 + j] += tau;
    }
    let (contacts, _) = resolve_contacts(model, &fk, &state.v_gen, contact);
    for c in &contacts {
        let cols = fk.point_jacobian(c.link, c.point, dof);
        for d in 0..dof {
            rhs[d] += cols[d].dot(&c.force);
        }
    }
    if state.ext_time_left > 0.0 {
        rhs[0] += state.ext_force.x;
        rhs[1] += state.ext_force.y;
        rhs[2] += state.ext_torque;
    }

    if model.fixed_base {
        // base rows are constrained; solve the joint block only
        let nj = model.num_joints();
        let sub = mass.view((3, 3), (nj, nj)).into_owned();
        let rhs_j = rhs.rows(3, nj).into_owned();
        let chol = sub.cholesky().ok_or(DynamicsError::SingularMassMatrix)?;
        let a_j = chol.solve(&rhs_j);
        let mut accel = DVector::zeros(dof);
        accel.rows_mut(3, nj).copy_from(&a_j);
        Ok(accel)
    } else {
        let chol = mass.cholesky().ok_or(DynamicsError::SingularMassMatrix)?;
        Ok(chol.solve(&rhs))
    }
}

/// Foot kinematics and the contact report at the current state.
pub fn foot_states(
    model: &RobotModel,
    state: &PhysicsState,
    contact: &ContactParams,
) -> (Vec<FootState>, ContactReport) {
    let fk = forward_kinematics(model, &state.q_gen);
    let (_, report) = resolve_contacts(model, &fk, &state.v_gen, contact);
    let feet = model
        .feet
        .iter()
        .map(|f| {
            let p = fk.point(model, f.link, f.offset);
            let height = p.y - contact.ground_height(p.x);
            FootState {
                position: p,
                velocity: fk.point_velocity(f.link, p, &state.v_gen),
                pitch: fk.link_angle[f.link],
                height,
                in_contact: height <= 0.0,
            }
        })
        .collect();
    (feet, report)
}

/// One semi-implicit Euler tick with PD torque recomputed at the current
/// state. Returns the applied (post-clamp) joint torques.
pub fn substep(
    model: &RobotModel,
    state: &mut PhysicsState,
    q_des: &DVector<f64>,
    actuator: &ActuatorConfig,
    contact: &ContactParams,
    dt: f64,
) -> Result<DVector<f64>, DynamicsError> {
    let q = state.joint_positions();
    let qd = state.joint_velocities();
    let tau = pd_torque(actuator, q_des, &q, &qd)?;
    let accel = forward_dynamics(model, state, &tau, contact)?;
    state.v_gen += accel * dt;
    if model.fixed_base {
        for d in 0..3 {
            state.v_gen[d] = 0.0;
        }
    }
    let delta = &state.v_gen * dt;
    state.q_gen += delta;
    state.time += dt;
    if state.ext_time_left > 0.0 {
        state.ext_time_left = (state.ext_time_left - dt).max(0.0);
        if state.ext_time_left == 0.0 {
            state.ext_force = Vector2::zeros();
            state.ext_torque = 0.0;
        }
    }
    if !state.is_finite() {
        return Err(DynamicsError::NonFiniteState(state.time));
    }
    Ok(tau)
}

/// Advances `substeps` PD/physics ticks against a fixed `q_des`. Returns the
/// post-step state, foot kinematics, contact report, and mean applied torque.
#[allow(clippy::type_complexity)]
pub fn step(
    model: &RobotModel,
    state: &PhysicsState,
    q_des: &DVector<f64>,
    actuator: &ActuatorConfig,
    contact: &ContactParams,
    substeps: usize,
    dt: f64,
) -> Result<(PhysicsState, Vec<FootState>, ContactReport, DVector<f64>), DynamicsError> {
    assert!(substeps >= 1, "substeps must be >= 1");
    let mut s = state.clone();
    let mut tau_sum = DVector::zeros(model.num_joints());
    for _ in 0..substeps {
        let tau = substep(model, &mut s, q_des, actuator, contact, dt)?;
        tau_sum += tau;
    }
    let tau_mean = tau_sum / substeps as f64;
    let (feet, report) = foot_states(model, &s, contact);
    Ok((s, feet, report, tau_mean))
}

/// Registers an external base wrench. `duration == 0` applies an impulsive
/// wrench (`force` in N·s) as an instantaneous generalized velocity change;
/// otherwise the wrench acts on the base until `duration` elapses.
pub fn apply_external_wrench(
    model: &RobotModel,
    state: &mut PhysicsState,
    force: Vector2<f64>,
    torque: f64,
    duration: f64,
) -> Result<(), DynamicsError> {
    assert!(duration >= 0.0, "duration must be >= 0");
    if duration == 0.0 {
        if force == Vector2::zeros() && torque == 0.0 {
            return Ok(());
        }
        let dof = model.dof();
        let (mass, _) = mass_matrix_and_bias(model, state);
        let mut imp = DVector::zeros(dof);
        imp[0] = force.x;
        imp[1] = force.y;
        imp[2] = torque;
        let chol = mass.cholesky().ok_or(DynamicsError::SingularMassMatrix)?;
        let dv = chol.solve(&imp);
        state.v_gen += dv;
    } else {
        state.ext_force = force;
        state.ext_torque = torque;
        state.ext_time_left = duration;
    }
    Ok(())
}

/// Total mechanical energy (kinetic + gravitational potential), used by the
/// integrator drift checks.
pub fn mechanical_energy(model: &RobotModel, state: &PhysicsState) -> f64 {
    let (mass, _) = mass_matrix_and_bias(model, state);
    let kinetic = 0.5 * state.v_gen.dot(&(&mass * &state.v_gen));
    let fk = forward_kinematics(model, &state.q_gen);
    let potential: f64 = model
        .links
        .iter()
        .enumerate()
        .filter(|(i, _)| !(model.fixed_base && *i == 0))
        .map(|(i, l)| l.mass * GRAVITY * fk.link_com[i].y)
        .sum();
    kinetic + potential
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::{double_pendulum, planar_biped};
    use approx::assert_relative_eq;

    fn free_single_link() -> RobotModel {
        RobotModel {
            links: vec![super::super::model::Link {
                name: "body".to_string(),
                mass: 10.0,
                com: Vector2::zeros(),
                inertia: 0.5,
                length: 0.2,
                tip: Vector2::new(0.0, -0.2),
            }],
            joints: vec![],
            feet: vec![],
            fixed_base: false,
        }
    }

    /// High gains so the gravity-load steady-state PD error stays below
    /// 1e-3 rad; pair with a fine timestep for stability.
    fn stiff_actuator(model: &RobotModel) -> ActuatorConfig {
        let mut act = ActuatorConfig::from_model(model);
        for i in 0..act.kp.len() {
            let ankle = i % 3 == 2;
            act.kp[i] = if ankle { 400.0 } else { 8000.0 };
            act.kd[i] = if ankle { 4.0 } else { 50.0 };
            act.torque_limit[i] = 1000.0;
        }
        act
    }

    fn no_contact() -> ContactParams {
        ContactParams {
            stiffness: 1e-9,
            damping: 0.0,
            tangential_damping: 0.0,
            ..ContactParams::default()
        }
    }

    #[test]
    fn pd_equilibrium_is_zero_torque() {
        let cfg = ActuatorConfig {
            kp: DVector::from_element(3, 10.0),
            kd: DVector::from_element(3, 1.0),
            dry_friction: DVector::zeros(3),
            torque_limit: DVector::from_element(3, 100.0),
        };
        let q = DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let tau = pd_torque(&cfg, &q, &q, &DVector::zeros(3)).unwrap();
        assert_eq!(tau, DVector::zeros(3));
    }

    #[test]
    fn pd_direct_evaluation() {
        let cfg = ActuatorConfig {
            kp: DVector::from_element(1, 10.0),
            kd: DVector::from_element(1, 1.0),
            dry_friction: DVector::zeros(1),
            torque_limit: DVector::from_element(1, 100.0),
        };
        let tau = pd_torque(
            &cfg,
            &DVector::from_element(1, 0.2),
            &DVector::zeros(1),
            &DVector::zeros(1),
        )
        .unwrap();
        assert_relative_eq!(tau[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn pd_saturates_at_torque_limit() {
        let cfg = ActuatorConfig {
            kp: DVector::from_element(1, 1000.0),
            kd: DVector::zeros(1),
            dry_friction: DVector::zeros(1),
            torque_limit: DVector::from_element(1, 60.0),
        };
        let tau = pd_torque(
            &cfg,
            &DVector::from_element(1, 1.0),
            &DVector::zeros(1),
            &DVector::zeros(1),
        )
        .unwrap();
        assert_eq!(tau[0], 60.0);
    }

    #[test]
    fn pd_dimension_mismatch_rejected() {
        let cfg = ActuatorConfig {
            kp: DVector::zeros(2),
            kd: DVector::zeros(2),
            dry_friction: DVector::zeros(2),
            torque_limit: DVector::from_element(2, 1.0),
        };
        let err = pd_torque(&cfg, &DVector::zeros(3), &DVector::zeros(2), &DVector::zeros(2));
        assert!(err.is_err());
    }

    #[test]
    fn free_fall_acceleration() {
        let model = free_single_link();
        let state = PhysicsState::new(&model, Vector2::new(0.0, 5.0), 0.0);
        let a = forward_dynamics(&model, &state, &DVector::zeros(0), &no_contact()).unwrap();
        assert_relative_eq!(a[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(a[1], -GRAVITY, epsilon = 1e-12);
        assert_relative_eq!(a[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn momentum_conserved_without_forces() {
        // zero torque, no contact: base velocity of a free link stays constant
        let model = free_single_link();
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, 100.0), 0.3);
        state.v_gen[0] = 1.0;
        state.v_gen[2] = 2.0;
        let q_des = DVector::zeros(0);
        let act = ActuatorConfig::from_model(&model);
        for _ in 0..100 {
            substep(&model, &mut state, &q_des, &act, &no_contact(), 1e-3).unwrap();
        }
        assert_relative_eq!(state.v_gen[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(state.v_gen[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn impulse_changes_base_velocity_exactly() {
        let model = free_single_link();
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, 1.0), 0.0);
        // 10 kg body: 5 N·s gives exactly 0.5 m/s
        apply_external_wrench(&model, &mut state, Vector2::new(5.0, 0.0), 0.0, 0.0).unwrap();
        assert_relative_eq!(state.v_gen[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn sustained_force_integrates_to_expected_velocity() {
        let model = free_single_link();
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, 100.0), 0.0);
        apply_external_wrench(&model, &mut state, Vector2::new(10.0, 0.0), 0.0, 0.2).unwrap();
        let act = ActuatorConfig::from_model(&model);
        let q_des = DVector::zeros(0);
        for _ in 0..400 {
            substep(&model, &mut state, &q_des, &act, &no_contact(), 1e-3).unwrap();
        }
        // F t / m = 10 * 0.2 / 10 = 0.2 m/s
        assert_relative_eq!(state.v_gen[0], 0.2, epsilon = 1e-6);
    }

    #[test]
    fn zero_wrench_is_identity() {
        let model = free_single_link();
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, 1.0), 0.0);
        let before = state.clone();
        apply_external_wrench(&model, &mut state, Vector2::zeros(), 0.0, 0.0).unwrap();
        assert_eq!(state, before);
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        use rand::{Rng, SeedableRng};
        let model = planar_biped();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut state = PhysicsState::new(&model, Vector2::new(0.0, 0.7), 0.0);
            for d in 0..model.dof() {
                state.q_gen[d] = rng.gen_range(-1.0..1.0);
            }
            let (m, _) = mass_matrix_and_bias(&model, &state);
            let sym_err = (&m - m.transpose()).abs().max();
            assert!(sym_err < 1e-12);
            let eig = m.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > 0.0), "min eig {:?}", eig.min());
        }
    }

    #[test]
    fn drop_settles_at_static_penetration() {
        let model = planar_biped();
        let contact = ContactParams {
            restitution: 0.0,
            ..ContactParams::default()
        };
        // standing height from FK, then drop from 0.1 m above it
        let probe = PhysicsState::new(&model, Vector2::new(0.0, 0.0), 0.0);
        let (feet, _) = foot_states(&model, &probe, &contact);
        let stand_z = -feet[0].height;
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, stand_z + 0.1), 0.0);
        let act = stiff_actuator(&model);
        let q_des = model.default_joint_positions();
        for _ in 0..40_000 {
            substep(&model, &mut state, &q_des, &act, &contact, 1e-4).unwrap();
        }
        // static balance: weight shared across four contact springs
        let expected_sink = model.total_mass() * GRAVITY / (4.0 * contact.stiffness);
        let settle = stand_z - state.q_gen[1];
        assert!(
            (settle - expected_sink).abs() < 0.01 * stand_z.max(0.01),
            "settle {settle}, expected {expected_sink}"
        );
    }

    #[test]
    fn pd_holds_pose_on_fixed_base() {
        let mut model = planar_biped();
        model.fixed_base = true;
        let mut state = PhysicsState::new(&model, Vector2::new(0.0, 2.0), 0.0);
        let act = stiff_actuator(&model);
        let q_des = model.default_joint_positions();
        // fine timestep keeps the stiff PD stable under explicit damping
        for _ in 0..10_000 {
            substep(&model, &mut state, &q_des, &act, &ContactParams::default(), 1e-4).unwrap();
        }
        let drift = (state.joint_positions() - &q_des).abs().max();
        assert!(drift < 1e-3, "joint drift {drift}");
    }

    #[test]
    fn contact_forces_respect_friction_cone() {
        use rand::{Rng, SeedableRng};
        let model = planar_biped();
        let contact = ContactParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut state = PhysicsState::new(
                &model,
                Vector2::new(rng.gen_range(-0.2..0.2), rng.gen_range(0.3..0.7)),
                rng.gen_range(-0.4..0.4),
            );
            for d in 0..model.dof() {
                state.v_gen[d] = rng.gen_range(-2.0..2.0);
            }
            let fk = forward_kinematics(&model, &state.q_gen);
            let (points, _) = resolve_contacts(&model, &fk, &state.v_gen, &contact);
            for c in points {
                let n = contact.normal().dot(&c.force);
                let t = contact.tangent().dot(&c.force);
                assert!(n >= 0.0);
                assert!(t.abs() <= contact.friction * n + 1e-9);
            }
        }
    }

    #[test]
    fn determinism_bitwise() {
        let model = planar_biped();
        let contact = ContactParams::default();
        let act = ActuatorConfig::from_model(&model);
        let q_des = model.default_joint_positions();
        let state = PhysicsState::new(&model, Vector2::new(0.0, 0.68), 0.05);
        let (a, ..) = step(&model, &state, &q_des, &act, &contact, 20, 1e-3).unwrap();
        let (b, ..) = step(&model, &state, &q_des, &act, &contact, 20, 1e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn double_pendulum_energy_drift_under_one_percent() {
        let model = double_pendulum(1.0, 0.5, 1.0, 0.5);
        let mut state = PhysicsState::new(&model, Vector2::zeros(), 0.0);
        state.q_gen[3] = 1.2;
        state.q_gen[4] = -0.4;
        let e0 = mechanical_energy(&model, &state);
        let act = ActuatorConfig::from_model(&model);
        let q_des = DVector::zeros(2);
        let contact = no_contact();
        let mut max_drift: f64 = 0.0;
        for _ in 0..1000 {
            substep(&model, &mut state, &q_des, &act, &contact, 1e-3).unwrap();
            let e = mechanical_energy(&model, &state);
            max_drift = max_drift.max((e - e0).abs());
        }
        // drift measured against the total mechanical energy scale
        let scale = e0.abs().max(1.0);
        assert!(max_drift / scale < 0.01, "drift {max_drift} vs scale {scale}");
    }
}
