// scratch probe, not part of the crate
use locogym::dynamics::*;
use nalgebra::{DVector, Vector2};

fn main() {
    let model = planar_biped();
    let contact = ContactParams::default();
    let act = ActuatorConfig::from_model(&model);
    let q_des = model.default_joint_positions();
    let probe = PhysicsState::new(&model, Vector2::new(0.0, 0.0), 0.0);
    let (feet, _) = foot_states(&model, &probe, &contact);
    let stand_z = -feet[0].height;
    println!("stand_z = {stand_z}");
    let mut state = PhysicsState::new(&model, Vector2::new(0.0, stand_z), 0.0);
    for i in 0..4000 {
        substep(&model, &mut state, &q_des, &act, &contact, 1e-3).unwrap();
        if i % 400 == 0 {
            println!("t={:.2} z={:.4} pitch={:.4} q={:?}", state.time, state.q_gen[1], state.q_gen[2],
                state.joint_positions().iter().map(|v| (v*100.0).round()/100.0).collect::<Vec<_>>());
        }
    }
}
