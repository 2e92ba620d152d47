//! Lose the operator link during manual flight and watch the drone land
//! itself on the ground robot.

use warevr::mission::{MissionMode, Phase};
use warevr::sim::FlightStatus;
use warevr::warehouse::{SlotAddress, WarehouseSpec};
use warevr::world::World;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let mut world = World::new(spec, 7)?;
    let target: SlotAddress = "1:front:3:2".parse()?;
    world.start_mission(MissionMode::VisualInspection { target })?;

    let mut granted = None;
    let mut landing = None;
    while world.robot().uav.flight_status != FlightStatus::Docked || landing.is_none() {
        world.tick();
        let t = world.tick_count();
        if granted.is_none() && world.mission().map(|m| m.phase()) == Some(Phase::ManualFlight) {
            granted = Some(t);
            println!("manual control at {:.2} s; operator goes silent", world.time_s());
        }
        if landing.is_none() && world.robot().uav.flight_status == FlightStatus::SoftLanding {
            landing = Some(t);
            println!(
                "soft landing at {:.2} s, altitude {:.2} m",
                world.time_s(),
                world.robot().uav.position.z
            );
        }
    }
    println!(
        "docked at {:.2} s, mission {:?}",
        world.time_s(),
        world.mission().map(|m| m.phase())
    );
    for e in world
        .log()
        .events()
        .iter()
        .filter(|e| e.event_type == "connection_lost" || e.event_type == "sim")
    {
        println!("  {} {} {}", e.tick, e.event_type, e.payload);
    }
    Ok(())
}
