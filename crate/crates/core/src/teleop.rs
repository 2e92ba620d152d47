//! Operator input mapping: controller displacement to velocity, panel
//! buttons, the standoff slider and hold-position.
//!
//! Commands produced here are in the operator frame (x right, y toward the
//! viewed rack, z up); [`VelocityCommand::operator_to_world`] turns them
//! into world-frame commands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DVec3;
use crate::sim::{CommandSource, VelocityCommand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    /// Velocity per meter of displacement, 1/s.
    pub gain: f64,
    pub deadzone: f64,
    pub v_max: f64,
    pub yaw_rate_max: f64,
    pub nudge_speed: f64,
    pub standoff_range: [f64; 2],
    /// Gain of the standoff distance regulator, 1/s.
    pub standoff_gain: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            gain: 1.0,
            deadzone: 0.05,
            v_max: 1.0,
            yaw_rate_max: 0.5,
            nudge_speed: 0.3,
            standoff_range: [0.8, 3.0],
            standoff_gain: 1.0,
        }
    }
}

impl TeleopConfig {
    pub fn check(&self) -> Result<(), String> {
        let finite = [
            self.gain,
            self.deadzone,
            self.v_max,
            self.yaw_rate_max,
            self.nudge_speed,
            self.standoff_range[0],
            self.standoff_range[1],
            self.standoff_gain,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("teleop values must be finite".into());
        }
        if self.gain <= 0.0 {
            return Err(format!("gain = {} must be > 0", self.gain));
        }
        if !(0.0..0.5).contains(&self.deadzone) {
            return Err(format!("deadzone = {} must be in [0, 0.5)", self.deadzone));
        }
        if self.v_max <= 0.0 || self.yaw_rate_max <= 0.0 || self.standoff_gain <= 0.0 {
            return Err("v_max, yaw_rate_max and standoff_gain must be > 0".into());
        }
        if self.nudge_speed < 0.0 {
            return Err("nudge_speed must be >= 0".into());
        }
        let [lo, hi] = self.standoff_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(format!("standoff_range [{lo}, {hi}] must be positive and ordered"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerInput {
    pub x_c: f64,
    pub y_c: f64,
    pub z_c: f64,
    /// Trackpad horizontal axis in `[-1, 1]`.
    pub yaw_input: f64,
    #[serde(default)]
    pub trigger_held: bool,
    #[serde(default)]
    pub timestamp: u64,
}

impl ControllerInput {
    pub fn at(x_c: f64, y_c: f64, z_c: f64) -> Self {
        Self {
            x_c,
            y_c,
            z_c,
            yaw_input: 0.0,
            trigger_held: false,
            timestamp: 0,
        }
    }

    pub fn position(&self) -> DVec3 {
        DVec3::new(self.x_c, self.y_c, self.z_c)
    }

    pub fn is_finite(&self) -> bool {
        self.position().is_finite() && self.yaw_input.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePose {
    pub position: DVec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TeleopError {
    #[error("no controller reference captured")]
    NoReference,
    #[error("controller input is not finite")]
    NonFinite,
}

pub fn capture_reference(input: &ControllerInput) -> ReferencePose {
    ReferencePose {
        position: input.position(),
    }
}

/// Moves `d` toward zero by `deadzone`; zero inside the deadzone.
pub fn shrink(d: f64, deadzone: f64) -> f64 {
    d.signum() * (d.abs() - deadzone).max(0.0)
}

/// Per axis `v = clamp(gain * shrink(d), ±v_max)`; yaw from the trackpad.
/// With the trigger held only yaw passes.
pub fn map_input(
    input: &ControllerInput,
    reference: Option<&ReferencePose>,
    cfg: &TeleopConfig,
) -> Result<VelocityCommand, TeleopError> {
    let reference = reference.ok_or(TeleopError::NoReference)?;
    if !input.is_finite() {
        return Err(TeleopError::NonFinite);
    }
    let yaw_rate = input.yaw_input.clamp(-1.0, 1.0) * cfg.yaw_rate_max;
    if input.trigger_held {
        return Ok(VelocityCommand::new(DVec3::ZERO, yaw_rate, CommandSource::Teleop));
    }
    let d = input.position() - reference.position;
    let axis = |d: f64| (cfg.gain * shrink(d, cfg.deadzone)).clamp(-cfg.v_max, cfg.v_max);
    Ok(VelocityCommand::new(
        DVec3::new(axis(d.x), axis(d.y), axis(d.z)),
        yaw_rate,
        CommandSource::Teleop,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelButton {
    Left,
    Right,
    Up,
    Down,
}

impl PanelButton {
    fn axis(self) -> DVec3 {
        match self {
            PanelButton::Left => DVec3::NEG_X,
            PanelButton::Right => DVec3::X,
            PanelButton::Up => DVec3::Z,
            PanelButton::Down => DVec3::NEG_Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PanelCommand {
    Button { button: PanelButton, held: bool },
    SetStandoff { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PanelOutput {
    Velocity(VelocityCommand),
    StandoffTarget(f64),
}

pub fn map_panel(cmd: &PanelCommand, cfg: &TeleopConfig) -> PanelOutput {
    match *cmd {
        PanelCommand::Button { button, held } => {
            let v = if held {
                button.axis() * cfg.nudge_speed
            } else {
                DVec3::ZERO
            };
            PanelOutput::Velocity(VelocityCommand::new(v, 0.0, CommandSource::Teleop))
        }
        PanelCommand::SetStandoff { fraction } => {
            let f = if fraction.is_finite() {
                fraction.clamp(0.0, 1.0)
            } else {
                0.0
            };
            let [lo, hi] = cfg.standoff_range;
            PanelOutput::StandoffTarget(lo + (hi - lo) * f)
        }
    }
}

/// Forward speed (operator y) that drives the distance to the rack toward
/// `target`.
pub fn standoff_regulator(target: f64, current: f64, cfg: &TeleopConfig) -> f64 {
    (cfg.standoff_gain * (current - target)).clamp(-cfg.v_max, cfg.v_max)
}

/// Operator-side state of one manual-flight session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TeleopSession {
    reference: Option<ReferencePose>,
    last_input: Option<ControllerInput>,
    held: Vec<PanelButton>,
    standoff_target: Option<f64>,
}

impl TeleopSession {
    pub fn capture(&mut self, input: &ControllerInput) {
        self.reference = Some(capture_reference(input));
        self.last_input = Some(*input);
    }

    pub fn reference(&self) -> Option<&ReferencePose> {
        self.reference.as_ref()
    }

    /// Stores the latest controller sample. Samples older than the last
    /// one are dropped.
    pub fn set_input(&mut self, input: ControllerInput) -> bool {
        if self.last_input.is_some_and(|l| input.timestamp < l.timestamp) {
            return false;
        }
        self.last_input = Some(input);
        true
    }

    pub fn apply_panel(&mut self, cmd: &PanelCommand, cfg: &TeleopConfig) {
        match (*cmd, map_panel(cmd, cfg)) {
            (PanelCommand::Button { button, held }, _) => {
                self.held.retain(|b| *b != button);
                if held {
                    self.held.push(button);
                }
            }
            (_, PanelOutput::StandoffTarget(t)) => self.standoff_target = Some(t),
            _ => {}
        }
    }

    pub fn standoff_target(&self) -> Option<f64> {
        self.standoff_target
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Operator-frame command for this tick. Controller axes outside the
    /// deadzone win over panel buttons; the slider drives y only when the
    /// controller leaves y alone. `current_standoff` is the measured
    /// distance to the viewed face, if any.
    pub fn command(&self, cfg: &TeleopConfig, current_standoff: Option<f64>) -> VelocityCommand {
        let mut out = self
            .last_input
            .and_then(|i| map_input(&i, self.reference.as_ref(), cfg).ok())
            .unwrap_or(VelocityCommand::hover(CommandSource::Teleop));
        if self.last_input.is_some_and(|i| i.trigger_held) {
            return out;
        }
        let mut panel = DVec3::ZERO;
        for b in &self.held {
            panel += b.axis() * cfg.nudge_speed;
        }
        for a in 0..3 {
            if out.v[a] == 0.0 {
                out.v[a] = panel[a];
            }
        }
        if out.v.y == 0.0 {
            if let (Some(t), Some(c)) = (self.standoff_target, current_standoff) {
                out.v.y = standoff_regulator(t, c, cfg);
            }
        }
        out
    }
}
