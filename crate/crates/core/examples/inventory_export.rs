//! Persist two missions to an inventory log, reopen it and export reports.

use warevr::inventory::{Inventory, ReportFormat};
use warevr::mission::MissionMode;
use warevr::warehouse::{GroundTruth, WarehouseSpec};
use warevr::world::{World, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let dir = std::env::temp_dir().join(format!("warevr-inventory-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let log = dir.join("inventory.ndjson");

    for mode in [
        MissionMode::Partial {
            racks: vec![0],
            alleys: vec![],
        },
        MissionMode::Full,
    ] {
        let inventory = Inventory::open(&log)?;
        let truth = GroundTruth::generate(&spec, 7);
        let mut world = World::with_truth(spec.clone(), truth, 7, inventory, WorldConfig::default())?;
        let id = world.start_mission(mode)?;
        world.run_until_done(2_000_000);
        println!(
            "mission {id}: {} records",
            world.inventory().mission_records(id).count()
        );
    }

    let store = Inventory::open(&log)?;
    let last = store.last_mission_id().expect("two missions");
    println!("reopened: {} records over missions {:?}", store.len(), store.missions());
    let csv = store.export_report(last, ReportFormat::Csv)?;
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    let tag = &store.records()[0].barcode_id;
    let latest = store.query_by_tag(tag).expect("known tag");
    println!("{tag} last seen at {} in mission {}", latest.address, latest.mission_id);
    println!("log and snapshots under {}", dir.display());
    Ok(())
}
