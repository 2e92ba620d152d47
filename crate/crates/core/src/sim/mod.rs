//! Fixed-timestep kinematic simulation of the ground robot and the drone.
//!
//! Per tick: safety override, cylinder clamp, fly-zone clamp, integration,
//! battery.

mod battery;
mod flyzone;
mod roadmap;

pub use battery::{BatteryState, CRITICAL_CHARGE, FLIGHT_SECONDS, RECHARGE_FACTOR};
pub use flyzone::{clamp_to_flyzone, CellIndex, FlyZoneError, FlyZoneMap, CEILING_MARGIN, CELL_SIZE, RACK_INFLATION};
pub use roadmap::{Roadmap, UGV_CLEARANCE};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, DVec2, DVec3};
use crate::warehouse::WarehouseSpec;

pub const DT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub cylinder_radius: f64,
    /// Height of the landing deck on the ground robot.
    pub deck_height: f64,
    /// Lowest flying height above the deck.
    pub deck_clearance: f64,
    pub ceiling_margin: f64,
    pub v_max: f64,
    pub yaw_rate_max: f64,
    /// Horizontal and vertical speed of the soft-landing profile.
    pub landing_speed: f64,
    pub ugv_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: DT,
            cylinder_radius: 1.0,
            deck_height: 0.3,
            deck_clearance: 0.5,
            ceiling_margin: CEILING_MARGIN,
            v_max: 1.0,
            yaw_rate_max: 0.5,
            landing_speed: 0.3,
            ugv_speed: 0.5,
        }
    }
}

pub const UGV_MAX_SPEED: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    Autonomous,
    Teleop,
    Safety,
}

/// World-frame velocity request for the drone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: DVec3,
    pub yaw_rate: f64,
    pub source: CommandSource,
}

impl VelocityCommand {
    pub fn new(v: DVec3, yaw_rate: f64, source: CommandSource) -> Self {
        Self { v, yaw_rate, source }
    }

    pub fn hover(source: CommandSource) -> Self {
        Self::new(DVec3::ZERO, 0.0, source)
    }

    pub fn is_zero(&self) -> bool {
        self.v == DVec3::ZERO && self.yaw_rate == 0.0
    }

    /// Rotates an operator-frame command (x right, y forward, z up) into
    /// the world frame for a drone with heading `yaw`.
    pub fn operator_to_world(&self, yaw: f64) -> Self {
        let fwd = DVec2::from_angle(yaw);
        let right = DVec2::new(fwd.y, -fwd.x);
        let h = right * self.v.x + fwd * self.v.y;
        Self::new(h.extend(self.v.z), self.yaw_rate, self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightStatus {
    Docked,
    Flying,
    SoftLanding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftLandingReason {
    ConnectionLoss,
    Abort,
    BatteryCritical,
    /// Routine landing requested by the mission.
    Recall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampKind {
    NonFinite,
    Speed,
    YawRate,
    Cylinder,
    Altitude,
    FlyZone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Clamped {
        kind: ClampKind,
        source: CommandSource,
    },
    /// A command arrived while the drone was not accepting commands.
    CommandIgnored {
        source: CommandSource,
        status: FlightStatus,
    },
    /// The ground robot waited this tick to keep the drone in its cylinder.
    UgvHeld,
    Launched,
    SoftLandingStarted {
        reason: SoftLandingReason,
    },
    Docked,
    BatteryDepleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UgvState {
    pub position: DVec2,
    pub heading: f64,
    pub speed: f64,
    pub docked_uav: bool,
    /// Remaining points to drive through.
    pub route: VecDeque<DVec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position: DVec3,
    pub yaw: f64,
    pub velocity: DVec3,
    pub flight_status: FlightStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub tick: u64,
    pub ugv: UgvState,
    pub uav: UavState,
    pub battery: BatteryState,
}

impl RobotState {
    pub fn docked_at(position: DVec2, config: &SimConfig) -> Self {
        Self {
            tick: 0,
            ugv: UgvState {
                position,
                heading: 0.0,
                speed: 0.0,
                docked_uav: true,
                route: VecDeque::new(),
            },
            uav: UavState {
                position: position.extend(config.deck_height),
                yaw: 0.0,
                velocity: DVec3::ZERO,
                flight_status: FlightStatus::Docked,
            },
            battery: BatteryState::full(config.dt),
        }
    }

    pub fn time(&self, dt: f64) -> f64 {
        self.tick as f64 * dt
    }

    pub fn is_flying(&self) -> bool {
        self.uav.flight_status == FlightStatus::Flying
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("drone is not flying")]
    AlreadyLanded,
    #[error("drone is not docked")]
    NotDocked,
    #[error("take-off position is not flyable")]
    LaunchBlocked,
    #[error("battery is empty")]
    BatteryEmpty,
}

/// Zeroes the outward radial component of `cmd_v` when the drone sits on
/// (or beyond) the cylinder wall, or when one step of the command would
/// leave the cylinder. Tangential and vertical components are kept.
pub fn clamp_to_cylinder(uav_pos: DVec3, ugv_pos: DVec2, cmd_v: DVec3, radius: f64, dt: f64) -> DVec3 {
    let rel = uav_pos.truncate() - ugv_pos;
    let r = rel.length();
    if r < 1e-12 {
        return cmd_v;
    }
    let exits = r >= radius - 1e-12 || (rel + cmd_v.truncate() * dt).length() > radius;
    if !exits {
        return cmd_v;
    }
    let n = rel / r;
    let radial = cmd_v.truncate().dot(n);
    if radial <= 0.0 {
        return cmd_v;
    }
    (cmd_v.truncate() - n * radial).extend(cmd_v.z)
}

/// Static surroundings of the robot: limits plus the fly-zone grid.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub config: SimConfig,
    pub flyzone: FlyZoneMap,
    pub ceiling_height: f64,
}

impl SimEnv {
    pub fn new(spec: &WarehouseSpec, config: SimConfig) -> Self {
        Self {
            config,
            flyzone: FlyZoneMap::build(spec, 0),
            ceiling_height: spec.ceiling_height,
        }
    }

    pub fn z_min(&self) -> f64 {
        self.config.deck_height + self.config.deck_clearance
    }

    pub fn z_max(&self) -> f64 {
        self.ceiling_height - self.config.ceiling_margin
    }

    pub fn deck(&self, ugv: DVec2) -> DVec3 {
        ugv.extend(self.config.deck_height)
    }

    /// The containment predicate checked after every flying step.
    pub fn is_contained(&self, uav: DVec3, ugv: DVec2) -> bool {
        (uav.truncate() - ugv).length() <= self.config.cylinder_radius + 1e-9
            && uav.z >= self.z_min() - 1e-9
            && uav.z <= self.z_max() + 1e-9
            && self.flyzone.is_flyable(uav)
    }
}

fn advance_ugv(ugv: &UgvState, speed: f64, dt: f64) -> (DVec2, VecDeque<DVec2>, f64) {
    let mut route = ugv.route.clone();
    let mut pos = ugv.position;
    let mut heading = ugv.heading;
    let mut budget = speed * dt;
    while budget > 0.0 {
        let Some(&target) = route.front() else { break };
        let d = target - pos;
        let len = d.length();
        if len <= budget {
            pos = target;
            budget -= len;
            route.pop_front();
            if len > 1e-12 {
                heading = d.to_angle();
            }
        } else {
            pos += d / len * budget;
            heading = d.to_angle();
            budget = 0.0;
        }
    }
    (pos, route, heading)
}

/// Safe velocity for a flying drone whose tether center will be `center`,
/// plus the clamps applied. `None` when no component-wise reduction works.
fn contain(env: &SimEnv, pos: DVec3, center: DVec2, v: DVec3, clamps: &mut Vec<ClampKind>) -> Option<DVec3> {
    let dt = env.config.dt;
    let r = env.config.cylinder_radius;
    if (pos.truncate() - center).length() > r + 1e-9 {
        return None;
    }
    let mut out = clamp_to_cylinder(pos, center, v, r, dt);
    let mut next_h = pos.truncate() + out.truncate() * dt;
    if (next_h - center).length() > r {
        let rel = next_h - center;
        next_h = center + rel * (r / rel.length());
        out = ((next_h - pos.truncate()) / dt).extend(out.z);
    }
    if out != v {
        clamps.push(ClampKind::Cylinder);
    }
    let nz = pos.z + out.z * dt;
    if (nz < env.z_min() && out.z < 0.0) || (nz > env.z_max() && out.z > 0.0) {
        out.z = 0.0;
        clamps.push(ClampKind::Altitude);
    }
    let fz = clamp_to_flyzone(&env.flyzone, pos, out, dt).ok()?;
    if fz != out {
        clamps.push(ClampKind::FlyZone);
    }
    env.is_contained(pos + fz * dt, center).then_some(fz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: RobotState,
    pub events: Vec<SimEvent>,
}

/// Advances the robot by one tick. Invalid commands are clamped, never
/// rejected; each clamp is reported as an event.
pub fn step(state: &RobotState, cmd: &VelocityCommand, env: &SimEnv) -> StepOutcome {
    let cfg = &env.config;
    let dt = cfg.dt;
    let mut next = state.clone();
    let mut events = Vec::new();
    next.tick += 1;

    let (ugv_pos, ugv_route, ugv_heading) = advance_ugv(&state.ugv, cfg.ugv_speed, dt);
    let mut ugv_moves = true;

    match state.uav.flight_status {
        FlightStatus::Docked => {
            if !cmd.is_zero() && cmd.source != CommandSource::Autonomous {
                events.push(SimEvent::CommandIgnored {
                    source: cmd.source,
                    status: FlightStatus::Docked,
                });
            }
            next.uav.position = env.deck(ugv_pos);
            next.uav.velocity = DVec3::ZERO;
            next.battery.recharge();
        }
        FlightStatus::SoftLanding => {
            if !cmd.is_zero() && cmd.source != CommandSource::Safety {
                events.push(SimEvent::CommandIgnored {
                    source: cmd.source,
                    status: FlightStatus::SoftLanding,
                });
            }
            ugv_moves = false;
            let pos = state.uav.position;
            let deck = env.deck(state.ugv.position);
            let dh = deck.truncate() - pos.truncate();
            let max_step = cfg.landing_speed * dt;
            let h_step = if dh.length() <= max_step {
                dh
            } else {
                dh / dh.length() * max_step
            };
            let z_step = (deck.z - pos.z).max(-max_step).min(0.0);
            let new_pos = DVec3::new(pos.x + h_step.x, pos.y + h_step.y, pos.z + z_step);
            next.uav.velocity = (new_pos - pos) / dt;
            next.battery.drain();
            if h_step == dh && new_pos.z <= deck.z {
                next.uav.position = deck;
                next.uav.velocity = DVec3::ZERO;
                next.uav.flight_status = FlightStatus::Docked;
                next.ugv.docked_uav = true;
                events.push(SimEvent::Docked);
            } else {
                next.uav.position = new_pos;
            }
        }
        FlightStatus::Flying => {
            let mut clamps = Vec::new();
            let mut v = cmd.v;
            let mut yaw_rate = cmd.yaw_rate;
            if !v.is_finite() || !yaw_rate.is_finite() {
                v = DVec3::ZERO;
                yaw_rate = 0.0;
                clamps.push(ClampKind::NonFinite);
            }
            if v.length() > cfg.v_max {
                v = v * (cfg.v_max / v.length());
                clamps.push(ClampKind::Speed);
            }
            if yaw_rate.abs() > cfg.yaw_rate_max {
                yaw_rate = yaw_rate.clamp(-cfg.yaw_rate_max, cfg.yaw_rate_max);
                clamps.push(ClampKind::YawRate);
            }
            let pos = state.uav.position;
            let safe = match contain(env, pos, ugv_pos, v, &mut clamps) {
                Some(s) => s,
                None => {
                    ugv_moves = false;
                    events.push(SimEvent::UgvHeld);
                    contain(env, pos, state.ugv.position, v, &mut clamps).unwrap_or_else(|| {
                        clamps.push(ClampKind::Cylinder);
                        let vertical = DVec3::new(0.0, 0.0, v.z);
                        contain(env, pos, state.ugv.position, vertical, &mut clamps).unwrap_or(DVec3::ZERO)
                    })
                }
            };
            clamps.sort_by_key(|k| *k as u8);
            clamps.dedup();
            for kind in clamps {
                events.push(SimEvent::Clamped {
                    kind,
                    source: cmd.source,
                });
            }
            next.uav.position = pos + safe * dt;
            next.uav.velocity = safe;
            next.uav.yaw = wrap_angle(state.uav.yaw + yaw_rate * dt);
            next.battery.drain();
            if next.battery.is_empty() {
                events.push(SimEvent::BatteryDepleted);
                next.uav.flight_status = FlightStatus::SoftLanding;
                events.push(SimEvent::SoftLandingStarted {
                    reason: SoftLandingReason::BatteryCritical,
                });
            }
        }
    }

    if ugv_moves {
        let moved = (ugv_pos - state.ugv.position).length();
        next.ugv.position = ugv_pos;
        next.ugv.route = ugv_route;
        next.ugv.heading = ugv_heading;
        next.ugv.speed = moved / dt;
        if next.uav.flight_status == FlightStatus::Docked {
            next.uav.position = env.deck(ugv_pos);
        }
    } else {
        next.ugv.speed = 0.0;
    }
    StepOutcome { state: next, events }
}

/// Take-off: the drone leaves the deck and hovers at the bottom of its
/// cylinder.
pub fn launch(state: &mut RobotState, env: &SimEnv) -> Result<SimEvent, SimError> {
    if state.uav.flight_status != FlightStatus::Docked {
        return Err(SimError::NotDocked);
    }
    if state.battery.is_empty() {
        return Err(SimError::BatteryEmpty);
    }
    let p = state.ugv.position.extend(env.z_min());
    if !env.is_contained(p, state.ugv.position) {
        return Err(SimError::LaunchBlocked);
    }
    state.uav.position = p;
    state.uav.velocity = DVec3::ZERO;
    state.uav.flight_status = FlightStatus::Flying;
    state.ugv.docked_uav = false;
    Ok(SimEvent::Launched)
}

/// Switches a flying drone to the command-ignoring descent onto the deck.
pub fn trigger_soft_landing(state: &mut RobotState, reason: SoftLandingReason) -> Result<SimEvent, SimError> {
    if state.uav.flight_status != FlightStatus::Flying {
        return Err(SimError::AlreadyLanded);
    }
    state.uav.flight_status = FlightStatus::SoftLanding;
    Ok(SimEvent::SoftLandingStarted { reason })
}

/// One charging tick on the deck.
pub fn dock_recharge(state: &mut RobotState) -> Result<(), SimError> {
    if state.uav.flight_status != FlightStatus::Docked {
        return Err(SimError::NotDocked);
    }
    state.battery.recharge();
    Ok(())
}

/// Owns the robot state and its environment; advanced by one context only.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub env: SimEnv,
    pub state: RobotState,
}

impl Simulator {
    pub fn new(spec: &WarehouseSpec, config: SimConfig, home: DVec2) -> Self {
        let env = SimEnv::new(spec, config);
        let state = RobotState::docked_at(home, &env.config);
        Self { env, state }
    }

    pub fn step(&mut self, cmd: &VelocityCommand) -> Vec<SimEvent> {
        let out = step(&self.state, cmd, &self.env);
        self.state = out.state;
        out.events
    }

    pub fn launch(&mut self) -> Result<SimEvent, SimError> {
        launch(&mut self.state, &self.env)
    }

    pub fn trigger_soft_landing(&mut self, reason: SoftLandingReason) -> Result<SimEvent, SimError> {
        trigger_soft_landing(&mut self.state, reason)
    }

    pub fn set_ugv_route(&mut self, route: impl IntoIterator<Item = DVec2>) {
        self.state.ugv.route = route.into_iter().collect();
    }
}
