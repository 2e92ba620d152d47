//! Print one horizontal slice of the fly-zone map.

use warevr::geometry::DVec3;
use warevr::sim::{FlyZoneMap, CELL_SIZE};
use warevr::warehouse::WarehouseSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = WarehouseSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json"))?;
    let map = FlyZoneMap::build(&spec, 0);
    let [nx, ny, nz] = map.dims();
    let z = 2.1;
    println!(
        "{nx} x {ny} x {nz} cells of {CELL_SIZE} m, {} flyable; slice at z = {z} m",
        map.flyable_count()
    );
    for j in (0..ny).rev().step_by(2) {
        let row: String = (0..nx)
            .map(|i| {
                let p = DVec3::new((i as f64 + 0.5) * CELL_SIZE, (j as f64 + 0.5) * CELL_SIZE, z);
                if map.is_flyable(p) {
                    '.'
                } else {
                    '#'
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
