//! Desk-scale locomotion RL stack: planar biped simulator, asymmetric
//! actor-critic PPO trainer, and a deployment runtime with series-parallel
//! mechanism conversion and latency modeling.

pub mod config;
pub mod dynamics;
pub mod env;
pub mod nn;
pub mod ppo;
