//! Deterministic virtual robot: point kinematics in a walled arena, drag
//! injection standing in for the child's hands, a fixed-step session loop,
//! and trace recording and replay.

mod backend;
mod script;
mod session;
mod trace;

pub use backend::SimBackend;
pub use script::{parse_script, Script, ScriptInput};
pub use session::{run_session, Input, Session, StopRule};
pub use trace::{replay, ReplayReport, SessionTrace, TickRecord};

use thiserror::Error;

use crate::behavior::BehaviorError;
use crate::geometry::Point;
use crate::hal::{HalError, LedCommand, WheelCommand, DEFAULT_MAX_SPEED};
use crate::planner::PlannerError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("drag path leaves the arena at ({x}, {y})")]
    PathOutOfArena { x: f64, y: f64 },
    #[error(transparent)]
    Hal(#[from] HalError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error("script line {line}: {msg}")]
    Script { line: usize, msg: String },
    #[error("malformed trace at line {line}: {msg}")]
    MalformedTrace { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Seconds per control tick.
    pub tick: f64,
    pub arena_width: f64,
    pub arena_height: f64,
    pub max_speed: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { tick: 0.05, arena_width: 2.0, arena_height: 2.0, max_speed: DEFAULT_MAX_SPEED, seed: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tick) {
            return Err(SimError::InvalidConfig(format!("tick {}", self.tick)));
        }
        if !positive(self.arena_width) || !positive(self.arena_height) {
            return Err(SimError::InvalidConfig(format!("arena {}x{}", self.arena_width, self.arena_height)));
        }
        if !positive(self.max_speed) {
            return Err(SimError::InvalidConfig(format!("max_speed {}", self.max_speed)));
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        (self.arena_width / 2.0, self.arena_height / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.arena_width).contains(&p.0) && (0.0..=self.arena_height).contains(&p.1)
    }

    pub fn clamp(&self, p: Point) -> Point {
        (p.0.clamp(0.0, self.arena_width), p.1.clamp(0.0, self.arena_height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Point,
    pub velocity: (f64, f64),
    pub led: LedCommand,
    pub touched: bool,
}

impl RobotState {
    pub fn at(position: Point) -> Self {
        Self { position, velocity: (0.0, 0.0), led: LedCommand::OFF, touched: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInputs {
    /// Displacement applied by hand during the tick, in meters.
    pub drag: (f64, f64),
    pub touched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Commands {
    pub wheel: WheelCommand,
    pub led: LedCommand,
}

/// One fixed step: the commanded velocity (frozen while touched) plus the
/// drag displacement, clamped to the arena walls.
pub fn step_sim(state: &RobotState, inputs: StepInputs, commands: Commands, dt: f64, cfg: &SimConfig) -> RobotState {
    let velocity = if inputs.touched { (0.0, 0.0) } else { commands.wheel.velocity() };
    let p = state.position;
    let next = (p.0 + velocity.0 * dt + inputs.drag.0, p.1 + velocity.1 * dt + inputs.drag.1);
    RobotState { position: cfg.clamp(next), velocity, led: commands.led, touched: inputs.touched }
}
