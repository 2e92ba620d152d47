//! Headless runner behind the `warevr` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::inventory::{Inventory, ReportFormat};
use crate::mission::{MissionMode, Phase};
use crate::scenario::{run_visual_inspection, PilotScript};
use crate::telemetry::{Server, ServerConfig};
use crate::warehouse::{validate_spec, GroundTruth, SlotAddress, WarehouseSpec};
use crate::world::{World, WorldConfig};

#[derive(Debug, Parser)]
#[command(name = "warevr", version, about = "Warehouse stocktaking simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Partial,
    Tagsearch,
    Inspect,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a spec and list every violation.
    Validate { spec: PathBuf },
    /// Run one mission headless and write the event log and reports.
    Mission {
        spec: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Barcode to look for (tagsearch).
        #[arg(long)]
        tag: Option<String>,
        /// Alley to search when the tag has no record (tagsearch).
        #[arg(long)]
        alley: Option<u32>,
        /// Racks to scan (partial), comma separated.
        #[arg(long, value_delimiter = ',')]
        racks: Vec<u32>,
        /// Alleys to scan (partial), comma separated.
        #[arg(long, value_delimiter = ',')]
        alleys: Vec<u32>,
        /// Slot to inspect, `rack:side:section:tier` (inspect).
        #[arg(long)]
        target: Option<SlotAddress>,
        /// Persistent inventory log; defaults to a fresh one under --out.
        #[arg(long)]
        inventory: Option<PathBuf>,
        #[arg(long, default_value_t = 5_000_000)]
        max_ticks: u64,
    },
    /// Serve the operator WebSocket endpoint.
    Serve {
        spec: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: String,
        #[arg(long)]
        seed: u64,
        /// Simulated seconds per wall second; 0 runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Attach a rendered raster to view frames.
        #[arg(long)]
        raster: bool,
    },
    /// Operator training scenarios.
    Scenario {
        #[command(subcommand)]
        kind: ScenarioKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioKind {
    /// Replay a pilot script and time how long the targets take to turn green.
    VisualInspection {
        spec: PathBuf,
        #[arg(long, default_value_t = 5)]
        targets: usize,
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        max_ticks: u64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Message(String),
    #[error("spec is invalid:\n{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn msg(e: impl std::fmt::Display) -> CliError {
    CliError::Message(e.to_string())
}

fn load_valid(path: &Path) -> Result<WarehouseSpec, CliError> {
    let spec = WarehouseSpec::load(path).map_err(|e| msg(format!("{}: {e}", path.display())))?;
    let report = validate_spec(&spec);
    if !report.is_empty() {
        return Err(CliError::Invalid(report.to_string()));
    }
    Ok(spec)
}

/// Runs one parsed invocation, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { spec } => {
            load_valid(&spec)?;
            writeln!(out, "valid")?;
            Ok(())
        }
        Command::Mission {
            spec,
            mode,
            seed,
            out: dir,
            tag,
            alley,
            racks,
            alleys,
            target,
            inventory,
            max_ticks,
        } => {
            let spec = load_valid(&spec)?;
            let mode = match mode {
                ModeArg::Full => MissionMode::Full,
                ModeArg::Partial => MissionMode::Partial { racks, alleys },
                ModeArg::Tagsearch => MissionMode::TagSearch {
                    tag: tag.ok_or_else(|| msg("--tag is required for tagsearch"))?,
                    alley,
                },
                ModeArg::Inspect => MissionMode::VisualInspection {
                    target: target.ok_or_else(|| msg("--target is required for inspect"))?,
                },
            };
            run_mission(spec, mode, seed, &dir, inventory.as_deref(), max_ticks, out)
        }
        Command::Serve {
            spec,
            listen,
            seed,
            speed,
            raster,
        } => {
            let spec = load_valid(&spec)?;
            let world = World::new(spec, seed).map_err(msg)?;
            let server = Server::start(
                world,
                ServerConfig {
                    listen,
                    speed,
                    with_raster: raster,
                    ..ServerConfig::default()
                },
            )?;
            writeln!(out, "listening on {}", server.url())?;
            out.flush()?;
            server.wait();
            Ok(())
        }
        Command::Scenario {
            kind:
                ScenarioKind::VisualInspection {
                    spec,
                    targets,
                    script,
                    max_ticks,
                },
        } => {
            let spec = load_valid(&spec)?;
            let seed = spec.seed;
            let script = PilotScript::load(&script).map_err(msg)?;
            let (report, _) = run_visual_inspection(spec, seed, targets, &script, max_ticks).map_err(msg)?;
            writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            )?;
            if !report.completed {
                return Err(msg(format!(
                    "scenario incomplete: {} of {} targets turned green",
                    report.transitions,
                    report.targets.len()
                )));
            }
            Ok(())
        }
    }
}

/// Headless mission run. Writes `events.ndjson`, `report.csv` and
/// `report.json` under `dir`.
pub fn run_mission(
    spec: WarehouseSpec,
    mode: MissionMode,
    seed: u64,
    dir: &Path,
    inventory: Option<&Path>,
    max_ticks: u64,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let inventory = match inventory {
        Some(p) => Inventory::open(p).map_err(msg)?,
        None => {
            let p = dir.join("inventory.ndjson");
            if p.exists() {
                fs::remove_file(&p)?;
            }
            Inventory::open(p).map_err(msg)?
        }
    };
    let truth = GroundTruth::generate(&spec, seed);
    let mut world = World::with_truth(spec, truth, seed, inventory, WorldConfig::default()).map_err(msg)?;
    let id = world.start_mission(mode).map_err(msg)?;
    let phase = world.run_until_done(max_ticks);
    fs::write(dir.join("events.ndjson"), world.log().to_ndjson())?;
    let progress = world.mission().map(|m| m.progress()).unwrap_or_default();
    let inv = world.inventory();
    fs::write(
        dir.join("report.csv"),
        inv.export_report(id, ReportFormat::Csv).map_err(msg)?,
    )?;
    let report = inv.stock_report(id, progress.failed).map_err(msg)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    let search = world
        .mission()
        .and_then(|m| m.search_result())
        .map(|r| serde_json::to_string(r).expect("serializes"));
    writeln!(
        out,
        "mission {id}: {} after {:.2} s sim time, {} verified, {} failed",
        phase.map_or("idle", Phase::as_str),
        world.time_s(),
        progress.verified,
        progress.failed
    )?;
    if let Some(s) = search {
        writeln!(out, "search: {s}")?;
    }
    match phase {
        Some(p) if p.is_terminal() => Ok(()),
        _ => Err(msg(format!("mission did not finish within {max_ticks} ticks"))),
    }
}
