//! Scan only one rack, then only one alley.

use warevr::mission::MissionMode;
use warevr::warehouse::WarehouseSpec;
use warevr::world::World;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let regions = [
        MissionMode::Partial {
            racks: vec![1],
            alleys: vec![],
        },
        MissionMode::Partial {
            racks: vec![],
            alleys: vec![0],
        },
    ];
    for mode in regions {
        let mut world = World::new(spec.clone(), 7)?;
        world.start_mission(mode.clone())?;
        world.run_until_done(2_000_000);
        let mut racks: Vec<String> = world
            .twin()
            .slots()
            .iter()
            .filter(|(_, s)| s.is_verified())
            .map(|(a, _)| format!("{}:{}", a.rack, a.side))
            .collect();
        racks.dedup();
        println!(
            "{mode:?}: {} slots verified in {:.1} s, faces {:?}",
            world.twin().verified_count(),
            world.time_s(),
            racks
        );
    }
    Ok(())
}
