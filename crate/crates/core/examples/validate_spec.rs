//! Validate a warehouse spec, then break it on purpose to see the report.
//!
//!     cargo run --example validate_spec -- [spec]

use warevr::geometry::DVec2;
use warevr::warehouse::{validate_spec, WarehouseSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/assets/warehouse_golden.json").into());
    let spec = WarehouseSpec::load(&path)?;
    println!("{path}: {}", validate_spec(&spec));

    let mut broken = spec.clone();
    broken.ceiling_height = 3.0;
    broken.racks[1].origin = DVec2::new(3.0, 4.0);
    broken.box_catalog[1].dims.h = 0.48;
    println!("\nbroken copy:\n{}", validate_spec(&broken));
    Ok(())
}
