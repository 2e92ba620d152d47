//! Find a pallet that was moved since the last stocktaking, then search for
//! one that does not exist and take the follow-up offered.

use warevr::mission::{MissionMode, SearchOption};
use warevr::warehouse::{SlotAddress, WarehouseSpec};
use warevr::world::World;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let mut world = World::new(spec, 7)?;
    world.start_mission(MissionMode::Full)?;
    world.run_until_done(2_000_000);

    // Someone moves a pallet to a free slot nearby on the same face.
    let rec = world.inventory().records()[10].clone();
    let to = world
        .spec()
        .face_addresses(rec.address.face())
        .into_iter()
        .filter(|a| world.truth().occupant(a).is_none() && !world.truth().clutter().contains(a))
        .min_by_key(|a| {
            a.section
                .abs_diff(rec.address.section)
                .max(a.tier.abs_diff(rec.address.tier))
        })
        .expect("a free slot");
    world.truth_mut().move_tag(&rec.barcode_id, to);
    println!("moved {} from {} to {}", rec.barcode_id, rec.address, to);
    world.start_mission(MissionMode::TagSearch {
        tag: rec.barcode_id.clone(),
        alley: None,
    })?;
    world.run_until_done(2_000_000);
    println!("search: {:?}", world.mission().and_then(|m| m.search_result()));

    world.start_mission(MissionMode::TagSearch {
        tag: "PLT-MISSING".into(),
        alley: Some(1),
    })?;
    world.run_until_done(2_000_000);
    println!("search: {:?}", world.mission().and_then(|m| m.search_result()));

    let id = world.choose_search_option(SearchOption::SwitchToVisualInspection, None)?;
    let target: Option<SlotAddress> = match &world.mission().expect("started").mode {
        MissionMode::VisualInspection { target } => Some(*target),
        _ => None,
    };
    println!("mission {id}: visual inspection of {target:?}");
    Ok(())
}
