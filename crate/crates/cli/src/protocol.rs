//! Bridge messages: one JSON object per WebSocket text frame, tagged by
//! `kind`. Every message carries `seq` (strictly increasing per sender) and
//! `t` (session seconds).

use serde::{Deserialize, Serialize};
use yolo_core::planner::Event;
use yolo_core::sim::TickRecord;

pub const PROTOCOL_VERSION: u32 = 1;

/// Messages the UI sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Hello { seq: u64, t: f64, version: u32 },
    /// Hand displacement in meters, applied during the tick at `t`.
    Drag { seq: u64, t: f64, dx: f64, dy: f64 },
    Touch { seq: u64, t: f64, on: bool },
    /// `profile <name>`, `schedule <r,c,f>` or `arc.<phase> <seconds>`.
    Config { seq: u64, t: f64, key: String, value: String },
}

impl ClientMessage {
    pub fn seq(&self) -> u64 {
        match self {
            ClientMessage::Hello { seq, .. }
            | ClientMessage::Drag { seq, .. }
            | ClientMessage::Touch { seq, .. }
            | ClientMessage::Config { seq, .. } => *seq,
        }
    }

    pub fn t(&self) -> f64 {
        match self {
            ClientMessage::Hello { t, .. }
            | ClientMessage::Drag { t, .. }
            | ClientMessage::Touch { t, .. }
            | ClientMessage::Config { t, .. } => *t,
        }
    }
}

/// Messages the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServerMessage {
    Hello {
        seq: u64,
        t: f64,
        version: u32,
        tick: f64,
        arena_width: f64,
        arena_height: f64,
        profile: String,
    },
    State {
        seq: u64,
        t: f64,
        x: f64,
        y: f64,
        r: u8,
        g: u8,
        b: u8,
        bright: f64,
        phase: String,
        state: String,
        touched: bool,
        profile: String,
        /// Messages discarded so far because the client fell behind.
        dropped: u64,
    },
    Event {
        seq: u64,
        t: f64,
        /// Event name, e.g. `recognized` or `execute_start`.
        event: String,
        state: String,
        phase: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        shape: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        technique: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        cause: Option<String>,
    },
    /// Sent just before the server closes the connection over a protocol
    /// violation.
    Error { seq: u64, t: f64, message: String },
}

impl ServerMessage {
    pub fn state(seq: u64, r: &TickRecord, profile: &str, dropped: u64) -> Self {
        ServerMessage::State {
            seq,
            t: r.t,
            x: r.position.0,
            y: r.position.1,
            r: r.led.color.0,
            g: r.led.color.1,
            b: r.led.color.2,
            bright: r.led.brightness,
            phase: r.phase.name().into(),
            state: r.state.name().into(),
            touched: r.touched,
            profile: profile.into(),
            dropped,
        }
    }

    pub fn event(seq: u64, e: &Event) -> Self {
        ServerMessage::Event {
            seq,
            t: e.t,
            event: e.kind.name().into(),
            state: e.state.name().into(),
            phase: e.phase.name().into(),
            shape: e.shape.map(|s| s.name().into()),
            technique: e.technique.map(|t| t.name().into()),
            cause: e.cause.clone(),
        }
    }
}
