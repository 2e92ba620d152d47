//! Full stocktaking of the golden warehouse: detect, plan, fly, verify.

use warevr::mission::MissionMode;
use warevr::warehouse::WarehouseSpec;
use warevr::world::World;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let mut world = World::new(spec, 7)?;
    let id = world.start_mission(MissionMode::Full)?;
    let phase = world.run_until_done(2_000_000);

    let m = world.mission().expect("mission started");
    let p = m.progress();
    println!("mission {id}: {phase:?} after {:.1} s", world.time_s());
    println!("  waypoints {}  verified {}  removed {}", p.total, p.verified, p.failed);
    println!("  pallets in the warehouse {}", world.truth().occupied_count());
    println!("  twin slots filled {}", world.twin().verified_count());
    let report = world.inventory().stock_report(id, p.failed)?;
    for (kind, n) in &report.counts {
        println!("  {kind:<12} {n}");
    }
    Ok(())
}
