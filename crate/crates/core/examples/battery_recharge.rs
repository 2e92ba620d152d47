//! Start a full mission on a low battery: the drone goes home, recharges on
//! the deck and picks up where it left off.

use warevr::mission::MissionMode;
use warevr::sim::BatteryState;
use warevr::warehouse::WarehouseSpec;
use warevr::world::World;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let mut world = World::new(spec, 7)?;
    let dt = world.config().sim.dt;
    world.robot_mut().battery = BatteryState::with_charge(dt, 0.23);
    world.start_mission(MissionMode::Full)?;
    let phase = world.run_until_done(2_000_000);

    for e in world.log().events() {
        if matches!(e.event_type.as_str(), "battery_critical" | "recharged") {
            println!("{:>8.2} s  {} {}", e.tick as f64 * dt, e.event_type, e.payload);
        }
    }
    let p = world.mission().expect("started").progress();
    println!(
        "{phase:?} after {:.1} s: {} verified of {}",
        world.time_s(),
        p.verified,
        p.total
    );
    Ok(())
}
