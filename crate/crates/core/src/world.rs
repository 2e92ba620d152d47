//! The complete simulated installation: twin, sensors, robot, store and
//! the current mission, advanced tick by tick. Operator commands enter
//! through a queue and are applied at the start of the next tick.

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geometry::Pose3D;
use crate::inventory::Inventory;
use crate::mission::{
    EventLog, Mission, MissionConfig, MissionCtx, MissionError, MissionMode, Phase, Progress, SearchOption,
    SearchResult,
};
use crate::render::{faced_face, render_view, Highlights, ViewFrame};
use crate::scan::Sensors;
use crate::sim::{
    CommandSource, FlightStatus, Roadmap, RobotState, SimConfig, SimEvent, Simulator, SoftLandingReason,
    VelocityCommand,
};
use crate::teleop::{ControllerInput, PanelCommand, TeleopSession};
use crate::warehouse::{generate_twin, DigitalTwin, GroundTruth, SlotAddress, TwinError, WarehouseSpec};

/// Silence on the operator link that ends manual flight.
pub const LINK_TIMEOUT_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    StartMission {
        mode: MissionMode,
    },
    Pause,
    Resume,
    Abort,
    /// Ends manual flight.
    Finish,
    CaptureReference {
        input: ControllerInput,
    },
    Teleop {
        input: ControllerInput,
    },
    Panel {
        command: PanelCommand,
    },
    /// Answer to an exhausted tag search.
    ResolveSearch {
        choice: SearchOption,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alley: Option<u32>,
    },
    Heartbeat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WorldConfig {
    pub sim: SimConfig,
    pub mission: MissionConfig,
}

/// Tracks when the operator was last heard from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkMonitor {
    last_heard: Option<u64>,
}

impl LinkMonitor {
    pub fn heard(&mut self, tick: u64) {
        self.last_heard = Some(self.last_heard.map_or(tick, |t| t.max(tick)));
    }

    pub fn last_heard(&self) -> Option<u64> {
        self.last_heard
    }
}

/// Whether the link counts as lost at tick `now`: silence since the later
/// of the last message and `since` reaches `timeout_ticks`.
pub fn detect_connection_loss(last_heard: Option<u64>, since: u64, now: u64, timeout_ticks: u64) -> bool {
    let from = last_heard.map_or(since, |h| h.max(since));
    now.saturating_sub(from) >= timeout_ticks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub time_s: f64,
    pub robot: RobotState,
    pub mission_id: Option<u64>,
    pub mode: Option<MissionMode>,
    pub phase: Option<Phase>,
    pub progress: Option<Progress>,
    pub recharging: bool,
    pub twin_revision: u64,
    pub verified_slots: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub search: Option<SearchResult>,
}

fn active<'a>(mission: &'a mut Option<Mission>, op: &'static str) -> Result<&'a mut Mission, MissionError> {
    mission
        .as_mut()
        .ok_or(MissionError::IllegalTransition { op, phase: Phase::Idle })
}

pub struct World {
    spec: WarehouseSpec,
    config: WorldConfig,
    twin: DigitalTwin,
    sensors: Sensors,
    sim: Simulator,
    roadmap: Roadmap,
    inventory: Inventory,
    teleop: TeleopSession,
    mission: Option<Mission>,
    last_search: Option<(String, SearchResult, SlotAddress)>,
    next_mission_id: u64,
    log: EventLog,
    link: LinkMonitor,
    highlights: Highlights,
    tx: Sender<OperatorCommand>,
    rx: Receiver<OperatorCommand>,
}

impl World {
    /// Builds a world over a stock generated from the spec's seed.
    pub fn new(spec: WarehouseSpec, seed: u64) -> Result<Self, TwinError> {
        let truth = GroundTruth::generate(&spec, seed);
        Self::with_truth(spec, truth, seed, Inventory::in_memory(), WorldConfig::default())
    }

    pub fn with_truth(
        spec: WarehouseSpec,
        truth: GroundTruth,
        seed: u64,
        inventory: Inventory,
        config: WorldConfig,
    ) -> Result<Self, TwinError> {
        let twin = generate_twin(&spec)?;
        let roadmap = Roadmap::build(&spec);
        let sim = Simulator::new(&spec, config.sim, roadmap.home());
        let sensors = Sensors::new(truth, &spec, seed);
        let next_mission_id = inventory.last_mission_id().map_or(1, |m| m + 1);
        let (tx, rx) = unbounded();
        Ok(Self {
            spec,
            config,
            twin,
            sensors,
            sim,
            roadmap,
            inventory,
            teleop: TeleopSession::default(),
            mission: None,
            last_search: None,
            next_mission_id,
            log: EventLog::default(),
            link: LinkMonitor::default(),
            highlights: Highlights::default(),
            tx,
            rx,
        })
    }

    pub fn spec(&self) -> &WarehouseSpec {
        &self.spec
    }

    pub fn twin(&self) -> &DigitalTwin {
        &self.twin
    }

    pub fn truth(&self) -> &GroundTruth {
        self.sensors.truth()
    }

    pub fn truth_mut(&mut self) -> &mut GroundTruth {
        self.sensors.truth_mut()
    }

    pub fn robot(&self) -> &RobotState {
        &self.sim.state
    }

    pub fn robot_mut(&mut self) -> &mut RobotState {
        &mut self.sim.state
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn into_inventory(self) -> Inventory {
        self.inventory
    }

    pub fn mission(&self) -> Option<&Mission> {
        self.mission.as_ref()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn roadmap(&self) -> &Roadmap {
        &self.roadmap
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn tick_count(&self) -> u64 {
        self.sim.state.tick
    }

    pub fn time_s(&self) -> f64 {
        self.sim.state.time(self.config.sim.dt)
    }

    pub fn set_targets(&mut self, targets: impl IntoIterator<Item = SlotAddress>) {
        self.highlights.targets = targets.into_iter().collect();
    }

    pub fn highlights(&self) -> &Highlights {
        &self.highlights
    }

    /// Handle for other threads to queue commands.
    pub fn sender(&self) -> Sender<OperatorCommand> {
        self.tx.clone()
    }

    pub fn submit(&self, cmd: OperatorCommand) {
        self.tx.send(cmd).expect("world owns the receiver");
    }

    fn link_timeout_ticks(&self) -> u64 {
        (LINK_TIMEOUT_S / self.config.sim.dt).round() as u64
    }

    fn current_phase(&self) -> Phase {
        self.mission.as_ref().map_or(Phase::Idle, |m| m.phase())
    }

    /// Applies one command right away.
    pub fn apply(&mut self, cmd: OperatorCommand) -> Result<(), MissionError> {
        let tick = self.sim.state.tick;
        self.link.heard(tick);
        if cmd == OperatorCommand::Heartbeat {
            return Ok(());
        }
        let res = self.dispatch(&cmd);
        let phase = self.current_phase();
        let payload = serde_json::to_value(&cmd).expect("command serializes");
        match &res {
            Ok(()) => self.log.push(tick, phase, "command_accepted", payload),
            Err(e) => self.log.push(
                tick,
                phase,
                "command_rejected",
                json!({ "command": payload, "error": e.to_string() }),
            ),
        }
        res
    }

    fn dispatch(&mut self, cmd: &OperatorCommand) -> Result<(), MissionError> {
        let tick = self.sim.state.tick;
        let cfg = self.spec.teleop;
        match cmd {
            OperatorCommand::StartMission { mode } => self.start_mission(mode.clone()).map(|_| ()),
            OperatorCommand::Pause => active(&mut self.mission, "pause")?.pause(tick, &mut self.log),
            OperatorCommand::Resume => active(&mut self.mission, "resume")?.resume(tick, &mut self.log),
            OperatorCommand::Finish => active(&mut self.mission, "finish")?.finish(tick, &mut self.log),
            OperatorCommand::Abort => {
                let robot = self.sim.state.clone();
                let land =
                    active(&mut self.mission, "abort")?.abort(tick, &mut self.log, &robot, SoftLandingReason::Abort)?;
                self.land(land);
                Ok(())
            }
            OperatorCommand::CaptureReference { input } => {
                self.teleop.capture(input);
                Ok(())
            }
            OperatorCommand::Teleop { input } => {
                self.teleop.set_input(*input);
                Ok(())
            }
            OperatorCommand::Panel { command } => {
                self.teleop.apply_panel(command, &cfg);
                Ok(())
            }
            OperatorCommand::ResolveSearch { choice, alley } => self.choose_search_option(*choice, *alley).map(|_| ()),
            OperatorCommand::Heartbeat => Ok(()),
        }
    }

    fn land(&mut self, reason: Option<SoftLandingReason>) {
        if let Some(reason) = reason {
            if let Ok(ev) = self.sim.trigger_soft_landing(reason) {
                let tick = self.sim.state.tick;
                let phase = self.current_phase();
                self.log_sim_event(tick, phase, &ev);
            }
        }
    }

    fn log_sim_event(&mut self, tick: u64, phase: Phase, ev: &SimEvent) {
        self.log.push(
            tick,
            phase,
            "sim",
            serde_json::to_value(ev).expect("sim event serializes"),
        );
    }

    pub fn start_mission(&mut self, mode: MissionMode) -> Result<u64, MissionError> {
        if self.mission.as_ref().is_some_and(|m| !m.phase().is_terminal()) {
            return Err(MissionError::BusyMission);
        }
        let id = self.next_mission_id;
        let robot = self.sim.state.clone();
        let mut ctx = MissionCtx {
            twin: &mut self.twin,
            sensors: &mut self.sensors,
            inventory: &mut self.inventory,
            roadmap: &self.roadmap,
            env: &self.sim.env,
            log: &mut self.log,
            config: &self.config.mission,
            teleop: VelocityCommand::hover(CommandSource::Teleop),
        };
        let mission = Mission::start(id, mode, &mut ctx, &robot)?;
        self.next_mission_id += 1;
        self.last_search = None;
        if matches!(mission.mode, MissionMode::VisualInspection { .. }) {
            self.teleop.clear();
        }
        self.mission = Some(mission);
        Ok(id)
    }

    /// Follow-up to an exhausted search: search another alley or hand the
    /// origin slot to the operator.
    pub fn choose_search_option(&mut self, choice: SearchOption, alley: Option<u32>) -> Result<u64, MissionError> {
        let Some((tag, SearchResult::Exhausted { alley: searched, .. }, origin)) = self.last_search.clone() else {
            return Err(MissionError::InvalidMode("no exhausted search to resolve".into()));
        };
        match choice {
            SearchOption::SelectAnotherAlley => {
                let next = alley.ok_or_else(|| MissionError::InvalidMode("choose an alley".into()))?;
                if next == searched {
                    return Err(MissionError::InvalidMode(format!("alley {next} was just searched")));
                }
                self.start_mission(MissionMode::TagSearch { tag, alley: Some(next) })
            }
            SearchOption::SwitchToVisualInspection => {
                self.start_mission(MissionMode::VisualInspection { target: origin })
            }
        }
    }

    /// Distance from the drone to the face in its crosshair.
    pub fn current_standoff(&self) -> Option<f64> {
        let uav = &self.sim.state.uav;
        let pose = Pose3D::new(uav.position, uav.yaw);
        let (face, _, _) = faced_face(&self.twin, &pose)?;
        Some(self.spec.face_geometry(face)?.distance(uav.position.truncate()))
    }

    /// Advances one tick.
    pub fn tick(&mut self) {
        let pending: Vec<OperatorCommand> = self.rx.try_iter().collect();
        for cmd in pending {
            let _ = self.apply(cmd);
        }
        let tick = self.sim.state.tick;

        // Link supervision in manual flight.
        let lost = self.mission.as_ref().is_some_and(|m| {
            m.phase() == Phase::ManualFlight
                && detect_connection_loss(
                    self.link.last_heard(),
                    m.manual_since().unwrap_or(tick),
                    tick,
                    self.link_timeout_ticks(),
                )
        });
        if lost {
            let robot = self.sim.state.clone();
            let mission = self.mission.as_mut().expect("checked above");
            self.log.push(
                tick,
                Phase::ManualFlight,
                "connection_lost",
                json!({ "last_heard": self.link.last_heard() }),
            );
            let land = mission
                .abort(tick, &mut self.log, &robot, SoftLandingReason::ConnectionLoss)
                .expect("manual flight can abort");
            self.teleop.clear();
            self.land(land);
        }

        let teleop = self
            .teleop
            .command(&self.spec.teleop, self.current_standoff())
            .operator_to_world(self.sim.state.uav.yaw);
        let robot = self.sim.state.clone();
        let out = self.mission.as_mut().map(|m| {
            let mut ctx = MissionCtx {
                twin: &mut self.twin,
                sensors: &mut self.sensors,
                inventory: &mut self.inventory,
                roadmap: &self.roadmap,
                env: &self.sim.env,
                log: &mut self.log,
                config: &self.config.mission,
                teleop,
            };
            m.tick(&mut ctx, &robot)
        });
        let phase = self.current_phase();
        if let Some(m) = &self.mission {
            if let (Phase::Done, Some(r @ SearchResult::Exhausted { .. })) = (m.phase(), m.search_result()) {
                if let (MissionMode::TagSearch { tag, .. }, Some(s)) = (&m.mode, m.search()) {
                    self.last_search = Some((tag.clone(), r.clone(), s.origin));
                }
            }
        }

        let mut cmd = VelocityCommand::hover(CommandSource::Autonomous);
        if let Some(out) = out {
            if let Some(route) = out.ugv_route {
                self.sim.set_ugv_route(route);
            }
            if out.launch {
                match self.sim.launch() {
                    Ok(ev) => self.log_sim_event(tick, phase, &ev),
                    Err(e) => self
                        .log
                        .push(tick, phase, "launch_failed", json!({ "error": e.to_string() })),
                }
            }
            self.land(out.land);
            cmd = out.uav;
        }
        if self.sim.state.uav.flight_status == FlightStatus::SoftLanding {
            cmd = VelocityCommand::hover(CommandSource::Safety);
        }
        let events = self.sim.step(&cmd);
        for ev in events {
            self.log_sim_event(tick, phase, &ev);
        }
    }

    /// Runs until the current mission reaches a terminal phase or
    /// `max_ticks` elapse. Returns the final phase, if a mission exists.
    pub fn run_until_done(&mut self, max_ticks: u64) -> Option<Phase> {
        for _ in 0..max_ticks {
            if self.mission.as_ref().is_none_or(|m| m.phase().is_terminal()) && self.rx.is_empty() {
                break;
            }
            self.tick();
        }
        self.mission.as_ref().map(|m| m.phase())
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let m = self.mission.as_ref();
        StateSnapshot {
            tick: self.sim.state.tick,
            time_s: self.time_s(),
            robot: self.sim.state.clone(),
            mission_id: m.map(|m| m.id),
            mode: m.map(|m| m.mode.clone()),
            phase: m.map(|m| m.phase()),
            progress: m.map(|m| m.progress()),
            recharging: m.is_some_and(|m| m.is_recharging()),
            twin_revision: self.twin.revision(),
            verified_slots: self.twin.verified_count(),
            search: m.and_then(|m| m.search_result().cloned()),
        }
    }

    pub fn view(&self, with_raster: bool) -> ViewFrame {
        let uav = &self.sim.state.uav;
        render_view(
            &self.twin,
            self.sensors.truth(),
            &Pose3D::new(uav.position, uav.yaw),
            &self.highlights,
            with_raster,
        )
    }
}
