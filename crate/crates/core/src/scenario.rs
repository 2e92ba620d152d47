//! Operator training scenarios. Visual inspection: the operator is shown a
//! handful of red target slots and flies the drone until all are green.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, DVec2, DVec3};
use crate::mission::{scan_pose, MissionMode, Phase};
use crate::render::{display_state, DisplayState};
use crate::rng::{stream, Stream};
use crate::sim::FlightStatus;
use crate::teleop::ControllerInput;
use crate::warehouse::{alleys, SlotAddress, TwinError, WarehouseSpec};
use crate::world::{OperatorCommand, World};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("no alley holds {0} labeled pallets")]
    NotEnoughTargets(usize),
    #[error("script line {line}: {message}")]
    BadScript { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("mission: {0}")]
    Mission(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub tick: u64,
    pub command: OperatorCommand,
}

/// Operator commands keyed by the tick at whose start they apply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PilotScript {
    pub steps: Vec<ScriptStep>,
}

impl PilotScript {
    pub fn from_ndjson(text: &str) -> Result<Self, ScenarioError> {
        let mut steps: Vec<ScriptStep> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let step: ScriptStep = serde_json::from_str(line).map_err(|e| ScenarioError::BadScript {
                line: i + 1,
                message: e.to_string(),
            })?;
            if steps.last().is_some_and(|s| s.tick > step.tick) {
                return Err(ScenarioError::BadScript {
                    line: i + 1,
                    message: "ticks must not decrease".into(),
                });
            }
            steps.push(step);
        }
        Ok(Self { steps })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_ndjson(&std::fs::read_to_string(path)?)
    }

    pub fn to_ndjson(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("step serializes") + "\n")
            .collect()
    }

    pub fn last_tick(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.tick)
    }
}

/// Targets: `n` labeled pallets of the first alley holding at least `n`,
/// drawn with the scenario stream of `seed`.
pub fn choose_targets(world: &World, n: usize, seed: u64) -> Result<Vec<SlotAddress>, ScenarioError> {
    let spec = world.spec();
    for alley in alleys(spec) {
        let mut occupied: Vec<SlotAddress> = alley
            .slots(spec)
            .into_iter()
            .filter(|a| world.truth().occupant(a).is_some())
            .collect();
        if occupied.len() >= n && n > 0 {
            occupied.shuffle(&mut stream(seed, Stream::Scenario));
            occupied.truncate(n);
            return Ok(occupied);
        }
    }
    Err(ScenarioError::NotEnoughTargets(n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub address: SlotAddress,
    /// Tick at which the target turned green.
    pub scanned_tick: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub targets: Vec<TargetReport>,
    /// Red-to-green transitions observed.
    pub transitions: usize,
    pub completed: bool,
    /// Simulated time from mission start to the last target turning green,
    /// or to the end of the run when incomplete.
    pub duration_s: f64,
    pub ticks: u64,
    pub final_phase: Option<Phase>,
}

/// Replays `script` against a fresh world and watches the targets.
pub fn run_visual_inspection(
    spec: WarehouseSpec,
    seed: u64,
    n_targets: usize,
    script: &PilotScript,
    max_ticks: u64,
) -> Result<(ScenarioReport, World), ScenarioError> {
    let mut world = World::new(spec, seed)?;
    let targets = choose_targets(&world, n_targets, seed)?;
    world.set_targets(targets.iter().copied());
    let mut by_tick: BTreeMap<u64, Vec<OperatorCommand>> = BTreeMap::new();
    for s in &script.steps {
        by_tick.entry(s.tick).or_default().push(s.command.clone());
    }
    let mut watch = TargetWatch::new(&world, &targets);
    let start = world.tick_count();
    let mut started = None;
    while world.tick_count() - start < max_ticks {
        let t = world.tick_count();
        for cmd in by_tick.remove(&t).unwrap_or_default() {
            let _ = world.apply(cmd);
        }
        if started.is_none() && world.mission().is_some() {
            started = Some(t);
        }
        world.tick();
        watch.observe(&world);
        let finished = world.mission().is_some_and(|m| m.phase().is_terminal());
        if finished && by_tick.is_empty() {
            break;
        }
    }
    let report = watch.report(&world, started.unwrap_or(start));
    Ok((report, world))
}

/// Tracks the red/green state of each target across ticks.
pub struct TargetWatch {
    targets: Vec<TargetReport>,
    last: Vec<DisplayState>,
    transitions: usize,
}

impl TargetWatch {
    pub fn new(world: &World, targets: &[SlotAddress]) -> Self {
        let last = targets
            .iter()
            .map(|a| display_state(world.twin(), world.highlights(), a))
            .collect();
        Self {
            targets: targets
                .iter()
                .map(|a| TargetReport {
                    address: *a,
                    scanned_tick: None,
                })
                .collect(),
            last,
            transitions: 0,
        }
    }

    pub fn observe(&mut self, world: &World) {
        for (i, t) in self.targets.iter_mut().enumerate() {
            let now = display_state(world.twin(), world.highlights(), &t.address);
            if self.last[i] == DisplayState::NeedsScan && now == DisplayState::Scanned {
                self.transitions += 1;
                t.scanned_tick = Some(world.tick_count());
            }
            self.last[i] = now;
        }
    }

    pub fn all_green(&self) -> bool {
        self.last.iter().all(|s| *s == DisplayState::Scanned)
    }

    pub fn report(&self, world: &World, start_tick: u64) -> ScenarioReport {
        let completed = self.all_green() && self.transitions == self.targets.len();
        let end = if completed {
            self.targets
                .iter()
                .filter_map(|t| t.scanned_tick)
                .max()
                .unwrap_or(start_tick)
        } else {
            world.tick_count()
        };
        ScenarioReport {
            targets: self.targets.clone(),
            transitions: self.transitions,
            completed,
            duration_s: (end - start_tick) as f64 * world.config().sim.dt,
            ticks: world.tick_count(),
            final_phase: world.mission().map(|m| m.phase()),
        }
    }
}

/// Closed-loop stand-in for a human pilot: flies to each target's standoff
/// pose through the controller mapping and holds still until the probe
/// turns it green. Used to record the shipped pilot script.
pub struct Autopilot {
    queue: Vec<SlotAddress>,
    /// Controller sample period in ticks.
    pub period: u64,
    pub kp: f64,
    pub speed: f64,
    captured: bool,
    finished: bool,
}

impl Autopilot {
    /// Visits targets in order along the alley.
    pub fn new(world: &World, targets: &[SlotAddress]) -> Self {
        let spec = world.spec();
        let key = |a: &SlotAddress| {
            let p = spec.slot_pose(a).expect("target exists").position;
            ((p.x * 1000.0).round() as i64, (p.y * 1000.0).round() as i64, a.tier)
        };
        let mut queue = targets.to_vec();
        queue.sort_by_key(key);
        Self {
            queue,
            period: 5,
            kp: 1.2,
            speed: 0.6,
            captured: false,
            finished: false,
        }
    }

    pub fn first_target(&self) -> Option<SlotAddress> {
        self.queue.first().copied()
    }

    /// Commands to issue before the next tick.
    pub fn commands(&mut self, world: &World) -> Vec<OperatorCommand> {
        let Some(m) = world.mission() else {
            return self
                .first_target()
                .map(|target| OperatorCommand::StartMission {
                    mode: MissionMode::VisualInspection { target },
                })
                .into_iter()
                .collect();
        };
        if m.phase() != Phase::ManualFlight || self.finished {
            return Vec::new();
        }
        let tick = world.tick_count();
        let mut out = Vec::new();
        if !self.captured {
            self.captured = true;
            let mut zero = ControllerInput::at(0.0, 0.0, 0.0);
            zero.timestamp = tick;
            out.push(OperatorCommand::CaptureReference { input: zero });
        }
        self.queue
            .retain(|a| !world.twin().slot(a).is_some_and(|s| s.is_verified()));
        let Some(target) = self.queue.first().copied() else {
            self.finished = true;
            out.push(OperatorCommand::Finish);
            return out;
        };
        if !tick.is_multiple_of(self.period) {
            return out;
        }
        let robot = world.robot();
        if robot.uav.flight_status != FlightStatus::Flying {
            return out;
        }
        let sim = &world.config().sim;
        let z_lo = sim.deck_height + sim.deck_clearance;
        let z_hi = world.spec().ceiling_height - sim.ceiling_margin;
        let goal = scan_pose(world.twin(), &target, world.config().mission.standoff);
        let mut g = goal.position;
        g.z = g.z.clamp(z_lo + 0.05, z_hi - 0.05);
        let mut v = (g - robot.uav.position) * self.kp;
        if v.length() > self.speed {
            v *= self.speed / v.length();
        }
        let fwd = DVec2::from_angle(robot.uav.yaw);
        let right = DVec2::new(fwd.y, -fwd.x);
        let op = DVec3::new(v.truncate().dot(right), v.truncate().dot(fwd), v.z);
        let cfg = &world.spec().teleop;
        let displacement = |v: f64| {
            if v.abs() < 1e-4 {
                0.0
            } else {
                v.signum() * (v.abs() / cfg.gain + cfg.deadzone)
            }
        };
        let yaw_err = wrap_angle(goal.yaw - robot.uav.yaw);
        let yaw_input = (1.5 * yaw_err / cfg.yaw_rate_max).clamp(-1.0, 1.0);
        let mut input = ControllerInput::at(displacement(op.x), displacement(op.y), displacement(op.z));
        input.yaw_input = if yaw_err.abs() < 1e-3 { 0.0 } else { yaw_input };
        input.timestamp = tick;
        out.push(OperatorCommand::Teleop { input });
        out
    }
}

/// Flies the autopilot and records what it sent.
pub fn record_pilot(
    spec: WarehouseSpec,
    seed: u64,
    n_targets: usize,
    max_ticks: u64,
) -> Result<(PilotScript, ScenarioReport), ScenarioError> {
    let mut world = World::new(spec, seed)?;
    let targets = choose_targets(&world, n_targets, seed)?;
    world.set_targets(targets.iter().copied());
    let mut pilot = Autopilot::new(&world, &targets);
    let mut watch = TargetWatch::new(&world, &targets);
    let mut script = PilotScript::default();
    let mut started = None;
    for _ in 0..max_ticks {
        let t = world.tick_count();
        for cmd in pilot.commands(&world) {
            world
                .apply(cmd.clone())
                .map_err(|e| ScenarioError::Mission(e.to_string()))?;
            script.steps.push(ScriptStep { tick: t, command: cmd });
        }
        if started.is_none() && world.mission().is_some() {
            started = Some(t);
        }
        world.tick();
        watch.observe(&world);
        if world.mission().is_some_and(|m| m.phase().is_terminal()) {
            break;
        }
    }
    Ok((script, watch.report(&world, started.unwrap_or(0))))
}
