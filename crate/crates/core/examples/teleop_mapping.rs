//! How controller displacement, panel buttons and the standoff slider turn
//! into drone velocity.

use warevr::sim::VelocityCommand;
use warevr::teleop::{
    capture_reference, map_input, ControllerInput, PanelButton, PanelCommand, TeleopConfig, TeleopSession,
};

fn main() {
    let cfg = TeleopConfig::default();
    let reference = capture_reference(&ControllerInput::at(0.1, 1.2, 1.0));
    for dy in [0.0, 0.04, 0.05, 0.1, 0.3, 0.6, 2.0] {
        let v = map_input(&ControllerInput::at(0.1, 1.2 + dy, 1.0), Some(&reference), &cfg).expect("finite");
        println!("push {dy:>4.2} m forward -> {:.3} m/s", v.v.y);
    }

    let mut session = TeleopSession::default();
    session.apply_panel(
        &PanelCommand::Button {
            button: PanelButton::Up,
            held: true,
        },
        &cfg,
    );
    session.apply_panel(&PanelCommand::SetStandoff { fraction: 0.25 }, &cfg);
    let op = session.command(&cfg, Some(2.0));
    println!("panel up + slider at 25% with the rack 2.0 m away: {:?}", op.v);
    let world: VelocityCommand = op.operator_to_world(std::f64::consts::FRAC_PI_2);
    println!("same command for a drone facing +y, world frame: {:?}", world.v);
}
