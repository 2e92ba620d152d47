//! Replay the shipped pilot script: five red targets, fly until all are green.

use warevr::scenario::{run_visual_inspection, PilotScript};
use warevr::warehouse::WarehouseSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = env!("CARGO_MANIFEST_DIR");
    let spec = WarehouseSpec::load(format!("{root}/assets/warehouse_golden.json"))?;
    let script = PilotScript::load(format!("{root}/assets/pilot_visual_inspection.ndjson"))?;
    let seed = spec.seed;
    let (report, world) = run_visual_inspection(spec, seed, 5, &script, 1_000_000)?;
    for t in &report.targets {
        let at = t.scanned_tick.map(|k| k as f64 * world.config().sim.dt);
        println!("{}  green at {:?} s", t.address, at);
    }
    println!(
        "{} of {} red -> green, {:.2} s sim time, mission {:?}",
        report.transitions,
        report.targets.len(),
        report.duration_s,
        report.final_phase
    );
    Ok(())
}
