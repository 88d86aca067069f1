//! Planar articulated rigid-body simulation with penalty contacts and PD
//! actuation.

pub mod model;
pub mod sim;

pub use model::{double_pendulum, planar_biped, FootSite, Joint, Link, ModelError, RobotModel};
pub use sim::{
    apply_external_wrench, foot_states, forward_dynamics, forward_kinematics,
    mass_matrix_and_bias, mechanical_energy, pd_torque, rot, step, substep, ActuatorConfig,
    ContactParams, ContactReport, DynamicsError, FootState, ForwardKin, PhysicsState, GRAVITY,
};
