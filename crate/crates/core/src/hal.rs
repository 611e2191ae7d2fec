//! Hardware abstraction: the sensor and actuator contract the planner talks
//! to.
//!
//! A backend owns the robot's touch sensor, optical motion sensor, the omni
//! wheel drive and the jewel LEDs. The crate ships one backend, the
//! simulator's [`SimBackend`](crate::sim::SimBackend). A physical backend
//! implements the same [`Backend`] trait:
//!
//! * `read_touch` reports the debounced touch state; a press counts once it
//!   has been held for [`DEBOUNCE_WINDOW`] seconds.
//! * `read_motion` reports the displacement since the previous read, in
//!   meters, together with the elapsed time.
//! * `drive` sets a world-frame velocity that holds until the next command.
//! * `set_led` sets the visible color, brightness and animation.
//!
//! Every call returns within one control tick. A backend is owned by a
//! single control loop and is never shared between threads.

use std::f64::consts::TAU;
use std::fmt;

use thiserror::Error;

/// Upper bound on wheel speed in m/s unless a backend is configured otherwise.
pub const DEFAULT_MAX_SPEED: f64 = 0.3;

/// Seconds a touch transition must persist before it is reported.
pub const DEBOUNCE_WINDOW: f64 = 0.05;

/// Slack for comparing simulated clock values built from sums of ticks.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HalError {
    #[error("backend unavailable")]
    BackendUnavailable,
    #[error("speed {speed} m/s outside [0, {max}]")]
    SpeedOutOfRange { speed: f64, max: f64 },
    #[error("heading {0} is not finite")]
    InvalidHeading(f64),
    #[error("brightness {0} outside [0, 1]")]
    InvalidBrightness(f64),
    #[error("no time has elapsed since the previous motion read")]
    NoElapsedTime,
    #[error("invalid motion delta dx={dx} dy={dy} dt={dt}")]
    InvalidMotion { dx: f64, dy: f64, dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchState {
    pub touched: bool,
    /// Seconds since the current press began; 0 when not touched.
    pub since: f64,
}

impl TouchState {
    pub const RELEASED: TouchState = TouchState { touched: false, since: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionDelta {
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
}

impl MotionDelta {
    pub fn new(dx: f64, dy: f64, dt: f64) -> Result<Self, HalError> {
        let delta = MotionDelta { dx, dy, dt };
        delta.validate()?;
        Ok(delta)
    }

    pub fn validate(&self) -> Result<(), HalError> {
        if self.dx.is_finite() && self.dy.is_finite() && self.dt.is_finite() && self.dt > 0.0 {
            Ok(())
        } else {
            Err(HalError::InvalidMotion { dx: self.dx, dy: self.dy, dt: self.dt })
        }
    }

    pub fn is_still(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }
}

/// World-frame velocity command for the holonomic base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    /// Radians in [0, 2π), measured from the world x axis.
    pub heading: f64,
    pub speed: f64,
}

impl WheelCommand {
    pub const STOP: WheelCommand = WheelCommand { heading: 0.0, speed: 0.0 };

    pub fn new(heading: f64, speed: f64, max_speed: f64) -> Result<Self, HalError> {
        if !heading.is_finite() {
            return Err(HalError::InvalidHeading(heading));
        }
        if !(speed.is_finite() && (0.0..=max_speed).contains(&speed)) {
            return Err(HalError::SpeedOutOfRange { speed, max: max_speed });
        }
        Ok(WheelCommand { heading: heading.rem_euclid(TAU), speed })
    }

    /// Command moving along `(vx, vy)`; a zero vector stops.
    pub fn from_velocity(vx: f64, vy: f64) -> Self {
        let speed = vx.hypot(vy);
        if speed == 0.0 {
            return Self::STOP;
        }
        WheelCommand { heading: vy.atan2(vx).rem_euclid(TAU), speed }
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.speed * self.heading.cos(), self.speed * self.heading.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const BLACK: Rgb = Rgb(0, 0, 0);
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0, self.1, self.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Animation {
    Solid,
    Blink,
    Pulse,
}

impl Animation {
    pub fn name(self) -> &'static str {
        match self {
            Animation::Solid => "solid",
            Animation::Blink => "blink",
            Animation::Pulse => "pulse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedCommand {
    pub color: Rgb,
    /// Instantaneous brightness in [0, 1], already modulated by the animation.
    pub brightness: f64,
    pub animation: Animation,
}

impl LedCommand {
    pub const OFF: LedCommand = LedCommand { color: Rgb::BLACK, brightness: 0.0, animation: Animation::Solid };

    pub fn new(color: Rgb, brightness: f64, animation: Animation) -> Result<Self, HalError> {
        let cmd = LedCommand { color, brightness, animation };
        cmd.validate()?;
        Ok(cmd)
    }

    pub fn validate(&self) -> Result<(), HalError> {
        if self.brightness.is_finite() && (0.0..=1.0).contains(&self.brightness) {
            Ok(())
        } else {
            Err(HalError::InvalidBrightness(self.brightness))
        }
    }
}

/// Sensor/actuator contract implemented by the simulator and, outside this
/// crate, by hardware drivers.
pub trait Backend {
    fn init(&mut self) -> Result<(), HalError>;
    fn shutdown(&mut self);
    fn read_touch(&mut self) -> Result<TouchState, HalError>;
    fn read_motion(&mut self) -> Result<MotionDelta, HalError>;
    fn drive(&mut self, cmd: WheelCommand) -> Result<(), HalError>;
    fn set_led(&mut self, cmd: LedCommand) -> Result<(), HalError>;
}

/// Debounces a raw touch signal: the reported state follows the raw state
/// only after the raw state has held for the debounce window.
#[derive(Debug, Clone, PartialEq)]
pub struct TouchDebouncer {
    window: f64,
    raw: bool,
    raw_since: f64,
    stable: bool,
}

impl Default for TouchDebouncer {
    fn default() -> Self {
        Self::new(DEBOUNCE_WINDOW)
    }
}

impl TouchDebouncer {
    pub fn new(window: f64) -> Self {
        Self { window, raw: false, raw_since: 0.0, stable: false }
    }

    fn settle(&mut self, now: f64) {
        if self.raw != self.stable && now - self.raw_since >= self.window - TIME_EPS {
            self.stable = self.raw;
        }
    }

    /// Record the raw sensor level at time `now`.
    pub fn update(&mut self, raw: bool, now: f64) {
        self.settle(now);
        if raw != self.raw {
            self.raw = raw;
            self.raw_since = now;
        }
    }

    pub fn raw(&self) -> bool {
        self.raw
    }

    pub fn state(&mut self, now: f64) -> TouchState {
        self.settle(now);
        if self.stable && self.raw {
            TouchState { touched: true, since: now - self.raw_since }
        } else if self.stable {
            // release not yet debounced; the press is still in effect
            TouchState { touched: true, since: 0.0 }
        } else {
            TouchState::RELEASED
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wheel_command_validation() {
        assert!(WheelCommand::new(0.0, 1.5, DEFAULT_MAX_SPEED).is_err());
        assert!(WheelCommand::new(0.0, -0.1, DEFAULT_MAX_SPEED).is_err());
        assert!(WheelCommand::new(f64::NAN, 0.1, DEFAULT_MAX_SPEED).is_err());
        let c = WheelCommand::new(-std::f64::consts::FRAC_PI_2, 0.1, DEFAULT_MAX_SPEED).unwrap();
        assert!((c.heading - 1.5 * std::f64::consts::PI).abs() < 1e-12);
        let (vx, vy) = WheelCommand::from_velocity(0.0, -0.2).velocity();
        assert!(vx.abs() < 1e-12 && (vy + 0.2).abs() < 1e-12);
        assert_eq!(WheelCommand::from_velocity(0.0, 0.0), WheelCommand::STOP);
    }

    #[test]
    fn led_validation() {
        assert!(LedCommand::new(Rgb::WHITE, 1.0, Animation::Solid).is_ok());
        assert_eq!(
            LedCommand::new(Rgb::WHITE, 1.2, Animation::Solid),
            Err(HalError::InvalidBrightness(1.2))
        );
        assert!(LedCommand::new(Rgb::WHITE, f64::NAN, Animation::Pulse).is_err());
    }

    #[test]
    fn motion_delta_validation() {
        assert!(MotionDelta::new(0.1, 0.0, 0.05).is_ok());
        assert!(MotionDelta::new(0.1, 0.0, 0.0).is_err());
        assert!(MotionDelta::new(f64::INFINITY, 0.0, 0.05).is_err());
    }

    #[test]
    fn debounce_press_and_release() {
        let mut d = TouchDebouncer::default();
        d.update(true, 1.00);
        assert!(!d.state(1.03).touched);
        let s = d.state(1.06);
        assert!(s.touched);
        assert!((s.since - 0.06).abs() < 1e-12);
        d.update(false, 2.0);
        assert!(d.state(2.02).touched);
        assert!(!d.state(2.05).touched);
    }

    #[test]
    fn short_press_is_ignored() {
        let mut d = TouchDebouncer::default();
        d.update(true, 1.00);
        d.update(false, 1.03);
        for t in [1.03, 1.05, 1.06, 2.0] {
            assert!(!d.state(t).touched);
        }
    }
}
