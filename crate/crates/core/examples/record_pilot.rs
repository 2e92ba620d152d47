//! Fly the visual-inspection scenario with the closed-loop autopilot and save
//! the commands it sent as a replayable pilot script.
//!
//!     cargo run --example record_pilot -- [spec] [out]

use std::path::PathBuf;

use warevr::scenario::record_pilot;
use warevr::warehouse::WarehouseSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut args = std::env::args().skip(1);
    let spec_path = args
        .next()
        .map_or_else(|| root.join("assets/warehouse_golden.json"), PathBuf::from);
    let out = args
        .next()
        .map_or_else(|| root.join("assets/pilot_visual_inspection.ndjson"), PathBuf::from);

    let spec = WarehouseSpec::load(&spec_path)?;
    let seed = spec.seed;
    let (script, report) = record_pilot(spec, seed, 5, 500_000)?;
    std::fs::write(&out, script.to_ndjson())?;
    println!(
        "{} commands, {}/{} targets green after {:.1} s -> {}",
        script.steps.len(),
        report.transitions,
        report.targets.len(),
        report.duration_s,
        out.display()
    );
    Ok(())
}
