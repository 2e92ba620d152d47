use warevr::mission::{MissionMode, Phase};
use warevr::sim::FLIGHT_SECONDS;
use warevr::warehouse::WarehouseSpec;
use warevr::world::World;

fn golden() -> WarehouseSpec {
    WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json")).unwrap()
}

/// Face area scanned per full charge of autonomous flight, order 200 m²,
/// with every slot stocked so each cell costs a dwell.
#[test]
fn area_scanned_per_charge() {
    let mut spec = golden();
    spec.stock.occupancy = 1.0;
    spec.stock.clutter = 0.0;
    let area: f64 = spec
        .reachable_faces()
        .iter()
        .map(|f| {
            let r = spec.rack(f.rack).unwrap();
            r.length() * r.height()
        })
        .sum();
    let mut world = World::new(spec, 42).unwrap();
    world.start_mission(MissionMode::Full).unwrap();
    // Charge spent, counted from the battery itself.
    let mut spent = 0.0;
    while !world.mission().unwrap().phase().is_terminal() {
        let before = world.robot().battery.charge();
        world.tick();
        spent += (before - world.robot().battery.charge()).max(0.0);
    }
    assert_eq!(world.mission().unwrap().phase(), Phase::Done);
    let per_charge = area / spent;
    println!(
        "{area:.1} m² for {:.0} s of flight: {per_charge:.0} m² per charge",
        spent * FLIGHT_SECONDS
    );
    assert!((100.0..=300.0).contains(&per_charge), "{per_charge:.0} m² per charge");
}
