//! Operator link: JSON frames over WebSocket.
//!
//! Every frame is `{"kind", "seq", "payload"}`. The server numbers its
//! outbound frames from one counter shared by all sessions; a client must
//! number its own frames strictly increasing. See `docs/protocol.md`.

mod server;

pub use server::{Client, Server, ServerConfig, TelemetryError};

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::world::{OperatorCommand, World};

pub const PROTOCOL_VERSION: u32 = 1;

/// Snapshot and view rates.
pub const STATE_HZ: f64 = 20.0;
pub const VIEW_HZ: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Hello,
    StateSnapshot,
    ViewFrame,
    Event,
    Command,
    Heartbeat,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub kind: FrameKind,
    pub seq: u64,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("clients may not send `{0:?}` frames")]
    UnexpectedKind(FrameKind),
    #[error("seq {got} does not follow {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("bad command: {0}")]
    BadCommand(String),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Malformed(_) => "MALFORMED",
            ProtocolError::UnexpectedKind(_) => "UNEXPECTED_KIND",
            ProtocolError::OutOfOrder { .. } => "OUT_OF_ORDER",
            ProtocolError::BadCommand(_) => "BAD_COMMAND",
        }
    }
}

impl Frame {
    pub fn new(kind: FrameKind, seq: u64, payload: Value) -> Self {
        Self { kind, seq, payload }
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("frame serializes")
    }

    pub fn decode(text: &str) -> Result<Self, ProtocolError> {
        serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))
    }

    pub fn command(seq: u64, cmd: &OperatorCommand) -> Self {
        Self::new(
            FrameKind::Command,
            seq,
            serde_json::to_value(cmd).expect("command serializes"),
        )
    }

    pub fn error(seq: u64, err: &ProtocolError, in_reply_to: Option<u64>) -> Self {
        Self::new(
            FrameKind::Error,
            seq,
            json!({ "code": err.code(), "message": err.to_string(), "in_reply_to": in_reply_to }),
        )
    }

    /// Operator command carried by a client frame.
    pub fn to_command(&self) -> Result<OperatorCommand, ProtocolError> {
        match self.kind {
            FrameKind::Command => {
                serde_json::from_value(self.payload.clone()).map_err(|e| ProtocolError::BadCommand(e.to_string()))
            }
            FrameKind::Heartbeat => Ok(OperatorCommand::Heartbeat),
            other => Err(ProtocolError::UnexpectedKind(other)),
        }
    }
}

/// Outbound numbering shared by every session.
#[derive(Debug, Default)]
pub struct Sequencer(AtomicU64);

impl Sequencer {
    pub fn next(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed) + 1
    }
}

/// Enforces strictly increasing client numbering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InboundGuard {
    last: Option<u64>,
}

impl InboundGuard {
    pub fn check(&mut self, seq: u64) -> Result<(), ProtocolError> {
        match self.last {
            Some(last) if seq <= last => Err(ProtocolError::OutOfOrder { last, got: seq }),
            _ => {
                self.last = Some(seq);
                Ok(())
            }
        }
    }
}

/// Decodes and validates one client text frame.
pub fn accept_client_frame(text: &str, guard: &mut InboundGuard) -> Result<(u64, OperatorCommand), ProtocolError> {
    let frame = Frame::decode(text)?;
    guard.check(frame.seq)?;
    Ok((frame.seq, frame.to_command()?))
}

pub fn hello_payload(world: &World) -> Value {
    json!({
        "protocol_version": PROTOCOL_VERSION,
        "tick": world.tick_count(),
        "dt": world.config().sim.dt,
        "twin_revision": world.twin().revision(),
        "spec": world.spec(),
    })
}

/// Whether a periodic stream at `hz` emits after advancing to `tick`.
pub fn due(tick: u64, dt: f64, hz: f64) -> bool {
    if tick == 0 {
        return true;
    }
    let bucket = |t: u64| (t as f64 * dt * hz + 1e-9).floor() as u64;
    bucket(tick) != bucket(tick - 1)
}

/// Frames the world produces after one tick: new log entries, and the
/// periodic snapshot and view. `log_cursor` tracks the events already sent.
pub fn frames_after_tick(world: &World, log_cursor: &mut usize, seq: &Sequencer, with_raster: bool) -> Vec<Frame> {
    let mut out = Vec::new();
    for e in world.log().since(*log_cursor) {
        out.push(Frame::new(
            FrameKind::Event,
            seq.next(),
            serde_json::to_value(e).expect("event serializes"),
        ));
    }
    *log_cursor = world.log().len();
    let tick = world.tick_count();
    let dt = world.config().sim.dt;
    if due(tick, dt, STATE_HZ) {
        out.push(Frame::new(
            FrameKind::StateSnapshot,
            seq.next(),
            serde_json::to_value(world.snapshot()).expect("snapshot serializes"),
        ));
    }
    if due(tick, dt, VIEW_HZ) {
        out.push(Frame::new(
            FrameKind::ViewFrame,
            seq.next(),
            serde_json::to_value(world.view(with_raster)).expect("view serializes"),
        ));
    }
    out
}
