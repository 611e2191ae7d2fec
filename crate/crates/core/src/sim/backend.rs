use crate::geometry::Point;
use crate::hal::{Backend, HalError, LedCommand, MotionDelta, TouchDebouncer, TouchState, WheelCommand};

use super::{step_sim, Commands, RobotState, SimConfig, StepInputs};

/// [`Backend`] over the simulated robot. The session loop sets the clock,
/// the raw touch level and the drag; the planner sees only the trait.
#[derive(Debug, Clone)]
pub struct SimBackend {
    cfg: SimConfig,
    state: RobotState,
    debouncer: TouchDebouncer,
    wheel: WheelCommand,
    now: f64,
    last_read: Option<(f64, Point)>,
    ready: bool,
}

impl SimBackend {
    pub fn new(cfg: SimConfig) -> Self {
        Self {
            cfg,
            state: RobotState::at(cfg.center()),
            debouncer: TouchDebouncer::default(),
            wheel: WheelCommand::STOP,
            now: 0.0,
            last_read: None,
            ready: false,
        }
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn wheel(&self) -> WheelCommand {
        self.wheel
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn set_time(&mut self, now: f64) {
        self.now = now;
    }

    pub fn set_raw_touch(&mut self, on: bool) {
        self.debouncer.update(on, self.now);
    }

    pub fn raw_touch(&self) -> bool {
        self.debouncer.raw()
    }

    /// Advance the robot over one tick of length `dt`.
    pub fn integrate(&mut self, drag: (f64, f64), dt: f64) {
        let inputs = StepInputs { drag, touched: self.state.touched };
        let commands = Commands { wheel: self.wheel, led: self.state.led };
        self.state = step_sim(&self.state, inputs, commands, dt, &self.cfg);
    }
}

impl Backend for SimBackend {
    fn init(&mut self) -> Result<(), HalError> {
        self.ready = true;
        self.last_read = Some((self.now, self.state.position));
        Ok(())
    }

    fn shutdown(&mut self) {
        self.wheel = WheelCommand::STOP;
        self.ready = false;
    }

    fn read_touch(&mut self) -> Result<TouchState, HalError> {
        if !self.ready {
            return Err(HalError::BackendUnavailable);
        }
        let touch = self.debouncer.state(self.now);
        self.state.touched = touch.touched;
        Ok(touch)
    }

    fn read_motion(&mut self) -> Result<MotionDelta, HalError> {
        let (t, p) = self.last_read.filter(|_| self.ready).ok_or(HalError::BackendUnavailable)?;
        let dt = self.now - t;
        if dt <= 0.0 {
            return Err(HalError::NoElapsedTime);
        }
        let q = self.state.position;
        self.last_read = Some((self.now, q));
        MotionDelta::new(q.0 - p.0, q.1 - p.1, dt)
    }

    fn drive(&mut self, cmd: WheelCommand) -> Result<(), HalError> {
        if !self.ready {
            return Err(HalError::BackendUnavailable);
        }
        self.wheel = WheelCommand::new(cmd.heading, cmd.speed, self.cfg.max_speed)?;
        Ok(())
    }

    fn set_led(&mut self, cmd: LedCommand) -> Result<(), HalError> {
        if !self.ready {
            return Err(HalError::BackendUnavailable);
        }
        cmd.validate()?;
        self.state.led = cmd;
        Ok(())
    }
}
