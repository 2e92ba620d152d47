//! Operational modes: full and partial stocktaking, tag search and visual
//! inspection, driven by one phase machine.

mod search;

pub use search::{
    expand_search_area, resolve_search, run_search, search_distance, SearchOption, SearchResult, TagSearchState,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geometry::{wrap_angle, DVec2, DVec3, Pose3D};
use crate::inventory::{Inventory, InventoryRecord};
use crate::render::{faced_face, slot_photo};
use crate::scan::{
    plan_probe_path, plan_scan_path, DetectionCandidate, PreliminaryMap, ScanError, ScanPath, Sensors,
    VerificationRecord, WaypointOutcome,
};
use crate::sim::{CommandSource, FlightStatus, Roadmap, RobotState, SimEnv, SoftLandingReason, VelocityCommand};
use crate::warehouse::{alley_of, Alley, DigitalTwin, RackFace, SlotAddress};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MissionMode {
    Full,
    /// Selected racks and/or alleys.
    Partial {
        #[serde(default)]
        racks: Vec<u32>,
        #[serde(default)]
        alleys: Vec<u32>,
    },
    TagSearch {
        tag: String,
        /// Alley to search when the store has no sighting, or to override it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alley: Option<u32>,
    },
    VisualInspection {
        target: SlotAddress,
    },
}

impl MissionMode {
    pub fn name(&self) -> &'static str {
        match self {
            MissionMode::Full => "full",
            MissionMode::Partial { .. } => "partial",
            MissionMode::TagSearch { .. } => "tag_search",
            MissionMode::VisualInspection { .. } => "visual_inspection",
        }
    }

    fn is_autonomous(&self) -> bool {
        !matches!(self, MissionMode::VisualInspection { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Navigating,
    Scanning,
    Paused,
    ManualFlight,
    Completing,
    Aborted,
    Done,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Aborted)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Navigating => "navigating",
            Phase::Scanning => "scanning",
            Phase::Paused => "paused",
            Phase::ManualFlight => "manual_flight",
            Phase::Completing => "completing",
            Phase::Aborted => "aborted",
            Phase::Done => "done",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The declared transition table.
pub fn legal_transition(from: Phase, to: Phase) -> bool {
    use Phase::*;
    matches!(
        (from, to),
        (Idle, Navigating)
            | (Navigating, Scanning | ManualFlight | Paused | Aborted)
            | (Scanning, Navigating | Paused | Completing | Aborted)
            | (Paused, Navigating | Scanning | Aborted)
            | (ManualFlight, Completing | Aborted)
            | (Completing, Done)
    )
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error("no inventory record for tag `{0}`; supply an alley")]
    UnknownTag(String),
    #[error("a mission is already running")]
    BusyMission,
    #[error("invalid mission: {0}")]
    InvalidMode(String),
    #[error("cannot {op} in phase {phase}")]
    IllegalTransition { op: &'static str, phase: Phase },
    #[error(transparent)]
    Scan(#[from] ScanError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionEvent {
    pub tick: u64,
    pub phase: Phase,
    pub event_type: String,
    pub payload: Value,
}

/// Append-only record of everything that happened; the source for replay
/// checks and the `events.ndjson` export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<MissionEvent>,
}

impl EventLog {
    pub fn push(&mut self, tick: u64, phase: Phase, event_type: &str, payload: Value) {
        self.events.push(MissionEvent {
            tick,
            phase,
            event_type: event_type.to_owned(),
            payload,
        });
    }

    pub fn events(&self) -> &[MissionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn since(&self, index: usize) -> &[MissionEvent] {
        &self.events[index.min(self.events.len())..]
    }

    pub fn of_type<'a>(&'a self, event_type: &'a str) -> impl Iterator<Item = &'a MissionEvent> + 'a {
        self.events.iter().filter(move |e| e.event_type == event_type)
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> serde_json::Result<Self> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { events })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub standoff: f64,
    /// Hover time at a scan waypoint before the laser read.
    pub dwell_ticks: u64,
    /// Near-hover time on one slot before a manual-flight laser probe.
    pub probe_dwell_ticks: u64,
    pub arrive_tolerance: f64,
    pub yaw_tolerance: f64,
    pub kp: f64,
    pub kp_yaw: f64,
    /// Autonomous speed limits, kept under the vehicle limits.
    pub cruise_speed: f64,
    pub cruise_yaw_rate: f64,
    /// Valid laser range for manual probes.
    pub probe_range: [f64; 2],
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            standoff: crate::scan::DEFAULT_STANDOFF,
            dwell_ticks: 150,
            probe_dwell_ticks: 50,
            arrive_tolerance: 0.02,
            yaw_tolerance: 0.02,
            kp: 1.5,
            kp_yaw: 1.5,
            cruise_speed: 0.9,
            cruise_yaw_rate: 0.45,
            probe_range: [0.8, 3.0],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub verified: usize,
    pub failed: usize,
    pub total: usize,
}

/// What the mission wants the robot to do this tick.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionOutput {
    pub uav: VelocityCommand,
    /// Replacement route for the ground robot, if it changed.
    pub ugv_route: Option<Vec<DVec2>>,
    pub launch: bool,
    pub land: Option<SoftLandingReason>,
}

impl MissionOutput {
    fn hover() -> Self {
        Self {
            uav: VelocityCommand::hover(CommandSource::Autonomous),
            ugv_route: None,
            launch: false,
            land: None,
        }
    }
}

/// Everything a mission may touch. Ground truth is reachable only through
/// the sensors.
pub struct MissionCtx<'a> {
    pub twin: &'a mut DigitalTwin,
    pub sensors: &'a mut Sensors,
    pub inventory: &'a mut Inventory,
    pub roadmap: &'a Roadmap,
    pub env: &'a SimEnv,
    pub log: &'a mut EventLog,
    pub config: &'a MissionConfig,
    /// Current operator command, world frame.
    pub teleop: VelocityCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub id: u64,
    pub mode: MissionMode,
    phase: Phase,
    resume_phase: Option<Phase>,
    path: ScanPath,
    progress: Progress,
    search: Option<TagSearchState>,
    result: Option<SearchResult>,
    dwell: u64,
    recharging: bool,
    ugv_goal: Option<DVec2>,
    aim: Option<(SlotAddress, u64)>,
    started_tick: u64,
    manual_since: Option<u64>,
    finished_tick: Option<u64>,
}

fn log_verification(log: &mut EventLog, tick: u64, phase: Phase, rec: &VerificationRecord) {
    log.push(
        tick,
        phase,
        "verification",
        serde_json::to_value(rec).expect("record serializes"),
    );
}

impl Mission {
    pub fn start(id: u64, mode: MissionMode, ctx: &mut MissionCtx, robot: &RobotState) -> Result<Self, MissionError> {
        let spec = ctx.twin.spec().clone();
        let tick = robot.tick;
        let mut m = Mission {
            id,
            mode: mode.clone(),
            phase: Phase::Idle,
            resume_phase: None,
            path: ScanPath::default(),
            progress: Progress::default(),
            search: None,
            result: None,
            dwell: 0,
            recharging: false,
            ugv_goal: None,
            aim: None,
            started_tick: tick,
            manual_since: None,
            finished_tick: None,
        };
        let faces: Vec<RackFace> = match &mode {
            MissionMode::Full => spec.reachable_faces(),
            MissionMode::Partial { racks, alleys } => {
                if racks.is_empty() && alleys.is_empty() {
                    return Err(MissionError::InvalidMode("partial region is empty".into()));
                }
                let mut faces: Vec<RackFace> = spec
                    .reachable_faces()
                    .into_iter()
                    .filter(|f| {
                        racks.contains(&f.rack)
                            || ctx
                                .roadmap
                                .alleys()
                                .iter()
                                .any(|a| alleys.contains(&a.id) && a.borders(*f))
                    })
                    .collect();
                faces.dedup();
                if faces.is_empty() {
                    return Err(MissionError::InvalidMode("partial region selects no rack face".into()));
                }
                faces
            }
            _ => Vec::new(),
        };

        match &mode {
            MissionMode::Full | MissionMode::Partial { .. } => {
                ctx.log.push(
                    tick,
                    Phase::Idle,
                    "mission_started",
                    json!({ "mission_id": id, "mode": mode }),
                );
                let mut map = PreliminaryMap::default();
                for face in &faces {
                    let found = ctx.sensors.detect(&spec, *face);
                    ctx.log.push(
                        tick,
                        Phase::Idle,
                        "candidates_detected",
                        json!({ "face": face, "count": found.len() }),
                    );
                    map.merge(found);
                }
                for c in map.candidates() {
                    ctx.twin
                        .mark_candidate(c)
                        .map_err(|_| ScanError::UnknownAddress(c.address))?;
                }
                m.path = match plan_scan_path(&map, ctx.twin, ctx.config.standoff) {
                    Ok(p) => p,
                    Err(ScanError::EmptyMap) => ScanPath::default(),
                    Err(e) => return Err(e.into()),
                };
                m.progress.total = m.path.len();
                let order: Vec<String> = m.path.waypoints().iter().map(|w| w.address.to_string()).collect();
                ctx.log
                    .push(tick, Phase::Idle, "path_planned", json!({ "waypoints": order }));
            }
            MissionMode::TagSearch { tag, alley } => {
                if tag.is_empty() {
                    return Err(MissionError::InvalidMode("tag is empty".into()));
                }
                let last = ctx.inventory.query_by_tag(tag).map(|r| r.address);
                let all = ctx.roadmap.alleys();
                let (origin, alley_id) = match (last, alley) {
                    (Some(addr), None) => {
                        let a = alley_of(all, addr.face())
                            .ok_or_else(|| MissionError::InvalidMode(format!("slot {addr} borders no alley")))?;
                        (addr, a.id)
                    }
                    (last, Some(id)) => {
                        let a = all
                            .iter()
                            .find(|a| a.id == *id)
                            .ok_or_else(|| MissionError::InvalidMode(format!("unknown alley {id}")))?;
                        (origin_in_alley(ctx.twin, a, last), a.id)
                    }
                    (None, None) => return Err(MissionError::UnknownTag(tag.clone())),
                };
                ctx.log.push(
                    tick,
                    Phase::Idle,
                    "mission_started",
                    json!({ "mission_id": id, "mode": mode }),
                );
                let mut s = TagSearchState::new(tag.clone(), origin, alley_id);
                let ring = expand_search_area(&mut s, ctx.twin);
                ctx.log.push(
                    tick,
                    Phase::Idle,
                    "search_ring",
                    json!({ "ring": s.ring, "origin": origin, "alley": alley_id, "slots": ring }),
                );
                m.path = plan_probe_path(&ring, ctx.twin, ctx.config.standoff)?;
                m.progress.total = m.path.len();
                m.search = Some(s);
            }
            MissionMode::VisualInspection { target } => {
                if !spec.contains_address(target) || alley_of(ctx.roadmap.alleys(), target.face()).is_none() {
                    return Err(MissionError::InvalidMode(format!("target {target} is not reachable")));
                }
                ctx.log.push(
                    tick,
                    Phase::Idle,
                    "mission_started",
                    json!({ "mission_id": id, "mode": mode }),
                );
            }
        }
        ctx.inventory
            .register_mission(id)
            .map_err(|e| MissionError::InvalidMode(e.to_string()))?;
        m.set_phase(Phase::Navigating, tick, ctx.log);
        Ok(m)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    pub fn path(&self) -> &ScanPath {
        &self.path
    }

    pub fn search(&self) -> Option<&TagSearchState> {
        self.search.as_ref()
    }

    pub fn search_result(&self) -> Option<&SearchResult> {
        self.result.as_ref()
    }

    pub fn started_tick(&self) -> u64 {
        self.started_tick
    }

    pub fn finished_tick(&self) -> Option<u64> {
        self.finished_tick
    }

    pub fn manual_since(&self) -> Option<u64> {
        self.manual_since
    }

    pub fn is_recharging(&self) -> bool {
        self.recharging
    }

    fn set_phase(&mut self, to: Phase, tick: u64, log: &mut EventLog) {
        assert!(
            legal_transition(self.phase, to),
            "illegal transition {} -> {}",
            self.phase,
            to
        );
        let from = self.phase;
        self.phase = to;
        if to == Phase::ManualFlight {
            self.manual_since = Some(tick);
        }
        if to.is_terminal() {
            self.finished_tick = Some(tick);
        }
        log.push(tick, to, "phase_changed", json!({ "from": from, "to": to }));
    }

    pub fn pause(&mut self, tick: u64, log: &mut EventLog) -> Result<(), MissionError> {
        if !matches!(self.phase, Phase::Navigating | Phase::Scanning) {
            return Err(MissionError::IllegalTransition {
                op: "pause",
                phase: self.phase,
            });
        }
        self.resume_phase = Some(self.phase);
        self.ugv_goal = None;
        self.set_phase(Phase::Paused, tick, log);
        Ok(())
    }

    pub fn resume(&mut self, tick: u64, log: &mut EventLog) -> Result<(), MissionError> {
        let (Phase::Paused, Some(back)) = (self.phase, self.resume_phase) else {
            return Err(MissionError::IllegalTransition {
                op: "resume",
                phase: self.phase,
            });
        };
        self.resume_phase = None;
        self.set_phase(back, tick, log);
        Ok(())
    }

    /// Stops the mission. Returns the landing the robot must perform.
    pub fn abort(
        &mut self,
        tick: u64,
        log: &mut EventLog,
        robot: &RobotState,
        reason: SoftLandingReason,
    ) -> Result<Option<SoftLandingReason>, MissionError> {
        if !matches!(
            self.phase,
            Phase::Navigating | Phase::Scanning | Phase::Paused | Phase::ManualFlight
        ) {
            return Err(MissionError::IllegalTransition {
                op: "abort",
                phase: self.phase,
            });
        }
        self.set_phase(Phase::Aborted, tick, log);
        log.push(
            tick,
            Phase::Aborted,
            "mission_aborted",
            json!({ "reason": reason, "progress": self.progress }),
        );
        Ok((robot.uav.flight_status == FlightStatus::Flying).then_some(reason))
    }

    /// Operator ends manual flight.
    pub fn finish(&mut self, tick: u64, log: &mut EventLog) -> Result<(), MissionError> {
        if self.phase != Phase::ManualFlight {
            return Err(MissionError::IllegalTransition {
                op: "finish",
                phase: self.phase,
            });
        }
        self.set_phase(Phase::Completing, tick, log);
        Ok(())
    }

    pub fn tick(&mut self, ctx: &mut MissionCtx, robot: &RobotState) -> MissionOutput {
        let tick = robot.tick;
        match self.phase {
            Phase::Idle | Phase::Done | Phase::Aborted => MissionOutput::hover(),
            Phase::Paused => {
                let mut out = MissionOutput::hover();
                if !robot.ugv.route.is_empty() {
                    out.ugv_route = Some(Vec::new());
                }
                out
            }
            Phase::Completing => {
                let mut out = MissionOutput::hover();
                match robot.uav.flight_status {
                    FlightStatus::Flying => out.land = Some(SoftLandingReason::Recall),
                    FlightStatus::SoftLanding => {}
                    FlightStatus::Docked => {
                        self.set_phase(Phase::Done, tick, ctx.log);
                        let mut payload = json!({ "mission_id": self.id, "progress": self.progress });
                        if let Some(r) = &self.result {
                            payload["search"] = serde_json::to_value(r).expect("result serializes");
                        }
                        ctx.log.push(tick, Phase::Done, "mission_done", payload);
                    }
                }
                out
            }
            Phase::ManualFlight => self.tick_manual(ctx, robot),
            Phase::Navigating | Phase::Scanning => {
                if let Some(out) = self.battery_guard(ctx, robot) {
                    return out;
                }
                if self.phase == Phase::Navigating {
                    self.tick_navigating(ctx, robot)
                } else {
                    self.tick_scanning(ctx, robot)
                }
            }
        }
    }

    /// Sends the drone home when the battery runs low and holds the mission
    /// until it is full again.
    fn battery_guard(&mut self, ctx: &mut MissionCtx, robot: &RobotState) -> Option<MissionOutput> {
        if !self.mode.is_autonomous() && self.phase != Phase::Navigating {
            return None;
        }
        let tick = robot.tick;
        let status = robot.uav.flight_status;
        if !self.recharging && robot.battery.is_critical() && status != FlightStatus::SoftLanding {
            self.recharging = true;
            self.ugv_goal = None;
            ctx.log.push(
                tick,
                self.phase,
                "battery_critical",
                json!({ "charge": robot.battery.charge() }),
            );
            if self.phase == Phase::Scanning {
                self.dwell = 0;
                self.set_phase(Phase::Navigating, tick, ctx.log);
            }
            let mut out = MissionOutput::hover();
            out.ugv_route = Some(Vec::new());
            if status == FlightStatus::Flying {
                out.land = Some(SoftLandingReason::BatteryCritical);
            }
            return Some(out);
        }
        if self.recharging {
            if status == FlightStatus::Docked && robot.battery.is_full() {
                self.recharging = false;
                ctx.log.push(tick, self.phase, "recharged", json!({ "charge": 1.0 }));
                return None;
            }
            return Some(MissionOutput::hover());
        }
        None
    }

    fn route_to(&mut self, ctx: &mut MissionCtx, robot: &RobotState, station: DVec2, out: &mut MissionOutput) {
        if self.ugv_goal.is_some_and(|g| (g - station).length() < 1e-9) {
            return;
        }
        self.ugv_goal = Some(station);
        match ctx.roadmap.route(robot.ugv.position, station) {
            Some(route) => out.ugv_route = Some(route.into_iter().skip(1).collect()),
            None => {
                ctx.log.push(
                    robot.tick,
                    self.phase,
                    "route_failed",
                    json!({ "from": robot.ugv.position, "to": station }),
                );
                out.ugv_route = Some(Vec::new());
            }
        }
    }

    /// Drives both robots toward a hover pose in front of `face`. Returns
    /// true once the drone holds the pose with the ground robot abreast.
    fn approach(
        &mut self,
        ctx: &mut MissionCtx,
        robot: &RobotState,
        target: Pose3D,
        face: RackFace,
        out: &mut MissionOutput,
    ) -> bool {
        let cfg = *ctx.config;
        let radius = ctx.env.config.cylinder_radius;
        let Some(alley) = alley_of(ctx.roadmap.alleys(), face).cloned() else {
            return false;
        };
        let station = alley.station_for(target.position.truncate());
        let goal = hover_goal(ctx.env, &alley, target);
        let ugv = robot.ugv.position;
        let ugv_arrived = (ugv - station).length() < 1e-6 && robot.ugv.route.is_empty();
        match robot.uav.flight_status {
            FlightStatus::SoftLanding => false,
            FlightStatus::Docked => {
                if robot.battery.is_critical() && self.mode.is_autonomous() {
                    return false;
                }
                if ugv_arrived {
                    out.launch = true;
                } else {
                    self.route_to(ctx, robot, station, out);
                }
                false
            }
            FlightStatus::Flying => {
                if (alley.station_for(ugv) - ugv).length() > 1e-6 {
                    // Wrong alley: land, drive, take off again.
                    self.ugv_goal = None;
                    out.land = Some(SoftLandingReason::Recall);
                    return false;
                }
                self.route_to(ctx, robot, station, out);
                let rel = goal.position.truncate() - ugv;
                let reach = radius - 0.05;
                let local = if rel.length() > reach {
                    ugv + rel * (reach / rel.length())
                } else {
                    goal.position.truncate()
                };
                out.uav = pcontrol(robot, local.extend(goal.position.z), goal.yaw, &cfg);
                let err = (robot.uav.position - goal.position).length();
                let yaw_err = wrap_angle(goal.yaw - robot.uav.yaw).abs();
                ugv_arrived && err < cfg.arrive_tolerance && yaw_err < cfg.yaw_tolerance
            }
        }
    }

    fn tick_navigating(&mut self, ctx: &mut MissionCtx, robot: &RobotState) -> MissionOutput {
        let tick = robot.tick;
        let mut out = MissionOutput::hover();
        if let MissionMode::VisualInspection { target } = self.mode.clone() {
            let pose = scan_pose(ctx.twin, &target, ctx.config.standoff);
            if self.approach(ctx, robot, pose, target.face(), &mut out) {
                self.set_phase(Phase::ManualFlight, tick, ctx.log);
                ctx.log.push(
                    tick,
                    Phase::ManualFlight,
                    "manual_control_granted",
                    json!({ "target": target }),
                );
            }
            return out;
        }
        let Some(wp) = self.path.current().cloned() else {
            // Nothing (left) to scan.
            self.set_phase(Phase::Scanning, tick, ctx.log);
            return self.tick_scanning(ctx, robot);
        };
        if self.approach(ctx, robot, wp.pose, wp.address.face(), &mut out) {
            self.dwell = 0;
            self.set_phase(Phase::Scanning, tick, ctx.log);
            ctx.log.push(
                tick,
                Phase::Scanning,
                "waypoint_reached",
                json!({ "address": wp.address }),
            );
        }
        out
    }

    fn tick_scanning(&mut self, ctx: &mut MissionCtx, robot: &RobotState) -> MissionOutput {
        let tick = robot.tick;
        let out = MissionOutput::hover();
        let Some(wp) = self.path.current().cloned() else {
            self.finish_path(ctx, tick);
            return out;
        };
        self.dwell += 1;
        if self.dwell < ctx.config.dwell_ticks {
            return out;
        }
        self.dwell = 0;
        let rec = ctx.sensors.verify(&wp.candidate);
        log_verification(ctx.log, tick, self.phase, &rec);
        let found_tag = self.admit(ctx, &rec, tick);
        let outcome = if rec.is_verified() {
            WaypointOutcome::Verified
        } else {
            ctx.log
                .push(tick, self.phase, "waypoint_removed", json!({ "address": wp.address }));
            WaypointOutcome::Removed
        };
        self.path.complete_current(outcome);

        if let Some(s) = self.search.as_ref() {
            if found_tag {
                let r = resolve_search(s, Some(wp.address));
                ctx.log.push(
                    tick,
                    self.phase,
                    "search_result",
                    serde_json::to_value(&r).expect("serializes"),
                );
                self.result = Some(r);
                self.set_phase(Phase::Completing, tick, ctx.log);
                return out;
            }
        }
        if self.path.is_finished() {
            self.finish_path(ctx, tick);
        } else {
            self.set_phase(Phase::Navigating, tick, ctx.log);
        }
        out
    }

    /// Applies a laser outcome to twin and store. Returns whether it read
    /// the searched tag.
    fn admit(&mut self, ctx: &mut MissionCtx, rec: &VerificationRecord, tick: u64) -> bool {
        if !rec.is_verified() {
            self.progress.failed += 1;
            return false;
        }
        if ctx.twin.apply_verification(rec).is_ok() {
            self.progress.verified += 1;
            ctx.log.push(
                tick,
                self.phase,
                "twin_updated",
                json!({ "address": rec.address, "revision": ctx.twin.revision() }),
            );
        }
        if let Some(record) = InventoryRecord::from_verification(rec, self.id, tick) {
            let photo = slot_photo(&record.address, &record.barcode_id, &record.measured_dims);
            let stored = ctx
                .inventory
                .store_snapshot(&record.snapshot_ref, &photo.to_ppm())
                .and_then(|_| ctx.inventory.insert(record));
            if let Err(e) = stored {
                ctx.log
                    .push(tick, self.phase, "inventory_error", json!({ "error": e.to_string() }));
            }
        }
        self.search
            .as_ref()
            .is_some_and(|s| rec.barcode_id() == Some(s.tag.as_str()))
    }

    /// Path exhausted: complete, or open the next search ring.
    fn finish_path(&mut self, ctx: &mut MissionCtx, tick: u64) {
        if let Some(s) = self.search.as_mut() {
            let ring = expand_search_area(s, ctx.twin);
            if ring.is_empty() {
                let r = resolve_search(s, None);
                ctx.log.push(
                    tick,
                    self.phase,
                    "search_result",
                    serde_json::to_value(&r).expect("serializes"),
                );
                self.result = Some(r);
            } else {
                ctx.log.push(
                    tick,
                    self.phase,
                    "search_ring",
                    json!({ "ring": s.ring, "slots": ring }),
                );
                match plan_probe_path(&ring, ctx.twin, ctx.config.standoff) {
                    Ok(more) => {
                        self.progress.total += more.len();
                        self.path.extend(more);
                        self.set_phase(Phase::Navigating, tick, ctx.log);
                        return;
                    }
                    Err(e) => ctx
                        .log
                        .push(tick, self.phase, "path_error", json!({ "error": e.to_string() })),
                }
            }
        }
        self.set_phase(Phase::Completing, tick, ctx.log);
    }

    fn tick_manual(&mut self, ctx: &mut MissionCtx, robot: &RobotState) -> MissionOutput {
        let tick = robot.tick;
        let mut out = MissionOutput::hover();
        let MissionMode::VisualInspection { target } = self.mode.clone() else {
            return out;
        };
        out.uav = ctx.teleop;
        if robot.uav.flight_status != FlightStatus::Flying {
            return out;
        }
        // Ground robot tracks the drone along the alley.
        if let Some(alley) = alley_of(ctx.roadmap.alleys(), target.face()) {
            let station = alley.station_for(robot.uav.position.truncate());
            if self.ugv_goal.is_none_or(|g| (g - station).length() > 0.05) {
                self.ugv_goal = Some(station);
                out.ugv_route = Some(vec![station]);
            }
        }
        // Laser probe of whatever slot the drone holds in its crosshair.
        let pose = Pose3D::new(robot.uav.position, robot.uav.yaw);
        let aimed = faced_face(ctx.twin, &pose).and_then(|(face, _, along)| {
            let spec = ctx.twin.spec();
            let g = spec.face_geometry(face)?;
            let dist = g.distance(robot.uav.position.truncate());
            let [lo, hi] = ctx.config.probe_range;
            if dist < lo || dist > hi || robot.uav.velocity.length() > 0.05 {
                return None;
            }
            let s = (along / g.cell_width).floor();
            let t = (robot.uav.position.z / g.cell_height).floor();
            if s < 0.0 || t < 0.0 || s >= f64::from(g.sections) || t >= f64::from(g.tiers) {
                return None;
            }
            Some(SlotAddress::new(face.rack, face.side, s as u32, t as u32))
        });
        self.aim = match (aimed, self.aim) {
            (Some(a), Some((b, n))) if a == b => Some((a, n + 1)),
            (Some(a), _) => Some((a, 1)),
            (None, _) => None,
        };
        if let Some((addr, n)) = self.aim {
            let done = ctx.twin.slot(&addr).is_some_and(|s| s.is_verified());
            if !done && n >= ctx.config.probe_dwell_ticks {
                self.aim = Some((addr, 0));
                let rec = ctx.sensors.verify(&DetectionCandidate::probe(addr));
                log_verification(ctx.log, tick, self.phase, &rec);
                self.admit(ctx, &rec, tick);
            }
        }
        out
    }
}

/// Standoff hover pose for a slot, looking at it.
pub fn scan_pose(twin: &DigitalTwin, addr: &SlotAddress, standoff: f64) -> Pose3D {
    let slot = twin.slot_pose(addr).expect("valid address");
    Pose3D::new(
        slot.position + (slot.heading() * standoff).extend(0.0),
        wrap_angle(slot.yaw + std::f64::consts::PI),
    )
}

/// Keeps a hover target reachable: inside the flight band and within the
/// tether cylinder of the ground robot's station.
fn hover_goal(env: &SimEnv, alley: &Alley, target: Pose3D) -> Pose3D {
    let mut p = target.position;
    p.z = p.z.clamp(env.z_min() + 0.05, env.z_max() - 0.05);
    let station = alley.station_for(p.truncate());
    let rel = p.truncate() - station;
    let reach = env.config.cylinder_radius - 0.1;
    if rel.length() > reach {
        let h = station + rel * (reach / rel.length());
        p = DVec3::new(h.x, h.y, p.z);
    }
    Pose3D::new(p, target.yaw)
}

fn pcontrol(robot: &RobotState, goal: DVec3, goal_yaw: f64, cfg: &MissionConfig) -> VelocityCommand {
    let mut v = (goal - robot.uav.position) * cfg.kp;
    if v.length() > cfg.cruise_speed {
        v *= cfg.cruise_speed / v.length();
    }
    let yaw_rate = (cfg.kp_yaw * wrap_angle(goal_yaw - robot.uav.yaw)).clamp(-cfg.cruise_yaw_rate, cfg.cruise_yaw_rate);
    VelocityCommand::new(v, yaw_rate, CommandSource::Autonomous)
}

/// Starting slot when searching an alley other than the last sighting's:
/// same section and tier on the alley's first face, clamped to its grid.
fn origin_in_alley(twin: &DigitalTwin, alley: &Alley, last: Option<SlotAddress>) -> SlotAddress {
    let face = alley.faces[0];
    let rack = twin.spec().rack(face.rack).expect("alley face exists");
    let (s, t) = last.map_or((0, 0), |a| (a.section, a.tier));
    SlotAddress::new(face.rack, face.side, s.min(rack.sections - 1), t.min(rack.tiers - 1))
}
