//! The planning state machine: storytelling arc clock, mirror/contrast
//! technique selection, touch handling, movement observation and behavior
//! scheduling.
//!
//! States: `Idle`, `Touched` (preempts everything), `Observing` (a movement
//! segment is open) and `Executing` (a composed behavior is running). The
//! robot's own motion is not observed while it executes.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::behavior::{make_movement, step, touch_override, ComposedBehavior, SocialProfile};
use crate::classifier::{ShapeClass, TrainedModel};
use crate::geometry::Point;
use crate::hal::{LedCommand, MotionDelta, TouchState, WheelCommand};
use crate::text::sig9;
use crate::trajectory::{SegmentationConfig, TimedPoint, Trajectory};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("arc phase {phase} must last a positive, finite time, got {secs}")]
    InvalidSchedule { phase: &'static str, secs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcPhase {
    RisingAction,
    Climax,
    FallingAction,
    Ended,
}

impl ArcPhase {
    pub fn name(self) -> &'static str {
        match self {
            ArcPhase::RisingAction => "rising",
            ArcPhase::Climax => "climax",
            ArcPhase::FallingAction => "falling",
            ArcPhase::Ended => "ended",
        }
    }
}

impl fmt::Display for ArcPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSchedule {
    pub rising: f64,
    pub climax: f64,
    pub falling: f64,
}

impl Default for ArcSchedule {
    fn default() -> Self {
        Self { rising: 120.0, climax: 60.0, falling: 120.0 }
    }
}

impl ArcSchedule {
    pub fn new(rising: f64, climax: f64, falling: f64) -> Result<Self, PlannerError> {
        let s = Self { rising, climax, falling };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        for (phase, secs) in [("rising", self.rising), ("climax", self.climax), ("falling", self.falling)] {
            if !(secs.is_finite() && secs > 0.0) {
                return Err(PlannerError::InvalidSchedule { phase, secs });
            }
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.rising + self.climax + self.falling
    }
}

pub fn phase_of(t: f64, sched: &ArcSchedule) -> ArcPhase {
    if t < sched.rising {
        ArcPhase::RisingAction
    } else if t < sched.rising + sched.climax {
        ArcPhase::Climax
    } else if t < sched.total() {
        ArcPhase::FallingAction
    } else {
        ArcPhase::Ended
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    Mirror,
    Contrast,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::Mirror => "mirror",
            Technique::Contrast => "contrast",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn technique_for(phase: ArcPhase) -> Option<Technique> {
    match phase {
        ArcPhase::RisingAction | ArcPhase::FallingAction => Some(Technique::Mirror),
        ArcPhase::Climax => Some(Technique::Contrast),
        ArcPhase::Ended => None,
    }
}

/// Shape the robot answers `last` with: the same shape for mirror, a
/// uniformly drawn different one for contrast.
pub fn respond<R: Rng + ?Sized>(last: ShapeClass, technique: Technique, rng: &mut R) -> ShapeClass {
    match technique {
        Technique::Mirror => last,
        Technique::Contrast => {
            let i = rng.random_range(0..ShapeClass::ALL.len() - 1);
            let i = if i >= last.index() { i + 1 } else { i };
            ShapeClass::ALL[i]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteractionState {
    Idle,
    Touched,
    Observing,
    Executing,
}

impl InteractionState {
    pub fn name(self) -> &'static str {
        match self {
            InteractionState::Idle => "idle",
            InteractionState::Touched => "touched",
            InteractionState::Observing => "observing",
            InteractionState::Executing => "executing",
        }
    }
}

impl fmt::Display for InteractionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    PhaseChange,
    SensorDropped,
    TouchStart,
    TouchEnd,
    ExecuteAborted,
    ObserveStart,
    SegmentIdle,
    Recognized,
    Unrecognized,
    ResponseSkipped,
    ExecuteStart,
    ExecuteDone,
    ConfigApplied,
    ConfigRejected,
    DragRejected,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::PhaseChange => "phase_change",
            EventKind::SensorDropped => "sensor_dropped",
            EventKind::TouchStart => "touch_start",
            EventKind::TouchEnd => "touch_end",
            EventKind::ExecuteAborted => "execute_aborted",
            EventKind::ObserveStart => "observe_start",
            EventKind::SegmentIdle => "segment_idle",
            EventKind::Recognized => "recognized",
            EventKind::Unrecognized => "unrecognized",
            EventKind::ResponseSkipped => "response_skipped",
            EventKind::ExecuteStart => "execute_start",
            EventKind::ExecuteDone => "execute_done",
            EventKind::ConfigApplied => "config_applied",
            EventKind::ConfigRejected => "config_rejected",
            EventKind::DragRejected => "drag_rejected",
        }
    }
}

/// One log entry. Formats as
/// `t=<s> state=<name> phase=<name> event=<name> [shape=] [technique=] [cause=]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub state: InteractionState,
    pub phase: ArcPhase,
    pub kind: EventKind,
    pub shape: Option<ShapeClass>,
    pub technique: Option<Technique>,
    /// Free text without spaces, e.g. `recognized:circle`, `proactive`.
    pub cause: Option<String>,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} state={} phase={} event={}", sig9(self.t), self.state, self.phase, self.kind.name())?;
        if let Some(s) = self.shape {
            write!(f, " shape={s}")?;
        }
        if let Some(t) = self.technique {
            write!(f, " technique={t}")?;
        }
        if let Some(c) = &self.cause {
            write!(f, " cause={c}")?;
        }
        Ok(())
    }
}

/// Replace whitespace and commas so free text fits in a single log field.
pub fn log_token(text: &str) -> String {
    text.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect::<Vec<_>>().join("_")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensors {
    pub touch: TouchState,
    pub motion: Option<MotionDelta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub state: InteractionState,
    pub phase: ArcPhase,
    /// Behavior started during this tick, if any.
    pub started: Option<ComposedBehavior>,
    pub wheel: WheelCommand,
    pub led: LedCommand,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub profile: SocialProfile,
    pub schedule: ArcSchedule,
    pub segmentation: SegmentationConfig,
    pub seed: u64,
}

#[derive(Debug, Clone)]
struct Execution {
    behavior: ComposedBehavior,
    started_at: f64,
}

#[derive(Debug, Clone)]
pub struct Planner {
    model: Arc<TrainedModel>,
    profile: SocialProfile,
    schedule: ArcSchedule,
    segmentation: SegmentationConfig,
    rng: ChaCha8Rng,
    state: InteractionState,
    phase: ArcPhase,
    position: Point,
    segment: Option<(f64, Trajectory)>,
    pending: Option<ShapeClass>,
    execution: Option<Execution>,
    idle_since: f64,
}

impl Planner {
    pub fn new(model: Arc<TrainedModel>, cfg: PlannerConfig) -> Self {
        Self {
            model,
            profile: cfg.profile,
            schedule: cfg.schedule,
            segmentation: cfg.segmentation,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            state: InteractionState::Idle,
            phase: ArcPhase::RisingAction,
            position: (0.0, 0.0),
            segment: None,
            pending: None,
            execution: None,
            idle_since: 0.0,
        }
    }

    pub fn state(&self) -> InteractionState {
        self.state
    }

    pub fn phase(&self) -> ArcPhase {
        self.phase
    }

    pub fn profile(&self) -> &SocialProfile {
        &self.profile
    }

    pub fn schedule(&self) -> &ArcSchedule {
        &self.schedule
    }

    /// Takes effect for behaviors started after the call.
    pub fn set_profile(&mut self, profile: SocialProfile) {
        self.profile = profile;
    }

    pub fn set_schedule(&mut self, schedule: ArcSchedule) {
        self.schedule = schedule;
    }

    fn event(&self, t: f64, kind: EventKind) -> Event {
        Event { t, state: self.state, phase: self.phase, kind, shape: None, technique: None, cause: None }
    }

    fn start(&mut self, behavior: ComposedBehavior, clock: f64) {
        self.execution = Some(Execution { behavior, started_at: clock });
        self.state = InteractionState::Executing;
    }

    fn become_idle(&mut self, clock: f64) {
        self.state = InteractionState::Idle;
        self.idle_since = clock;
    }

    /// Advance one control tick covering `[clock - dt, clock]`.
    pub fn tick(&mut self, sensors: Sensors, clock: f64, dt: f64) -> TickOutput {
        let mut events = Vec::new();
        let mut started = None;

        let phase = phase_of(clock, &self.schedule);
        if phase != self.phase {
            self.phase = phase;
            events.push(Event { cause: Some("time".into()), ..self.event(clock, EventKind::PhaseChange) });
        }

        let touch = if sensors.touch.since.is_finite() && sensors.touch.since >= 0.0 {
            sensors.touch
        } else {
            events.push(Event { cause: Some("touch".into()), ..self.event(clock, EventKind::SensorDropped) });
            TouchState { touched: self.state == InteractionState::Touched, since: 0.0 }
        };
        let motion = match sensors.motion {
            Some(m) => match m.validate() {
                Ok(()) => Some(m),
                Err(e) => {
                    events.push(Event { cause: Some(log_token(&e.to_string())), ..self.event(clock, EventKind::SensorDropped) });
                    None
                }
            },
            None => None,
        };

        let was_executing = self.state == InteractionState::Executing;

        if touch.touched && self.state != InteractionState::Touched {
            if self.execution.take().is_some() {
                events.push(Event { cause: Some("touch".into()), ..self.event(clock, EventKind::ExecuteAborted) });
            }
            self.state = InteractionState::Touched;
            events.push(Event { cause: Some("touch".into()), ..self.event(clock, EventKind::TouchStart) });
        } else if !touch.touched && self.state == InteractionState::Touched {
            self.become_idle(clock);
            events.push(Event { cause: Some("release".into()), ..self.event(clock, EventKind::TouchEnd) });
        }

        if !was_executing && self.state != InteractionState::Executing {
            self.observe(motion, clock, dt, &mut events);
        }

        if self.state == InteractionState::Idle {
            if let Some(last) = self.pending.take() {
                match technique_for(self.phase) {
                    Some(technique) => {
                        let shape = respond(last, technique, &mut self.rng);
                        let behavior = make_movement(&self.profile, shape);
                        started = Some(behavior.clone());
                        self.start(behavior, clock);
                        events.push(Event {
                            shape: Some(shape),
                            technique: Some(technique),
                            cause: Some(format!("recognized:{last}")),
                            ..self.event(clock, EventKind::ExecuteStart)
                        });
                    }
                    None => events.push(Event {
                        shape: Some(last),
                        cause: Some("arc_ended".into()),
                        ..self.event(clock, EventKind::ResponseSkipped)
                    }),
                }
            } else if self.segment.is_none() && self.phase != ArcPhase::Ended {
                if let Some(p) = self.profile.proactivity {
                    if clock - self.idle_since >= p - TIME_EPS {
                        let shape = ShapeClass::ALL[self.rng.random_range(0..ShapeClass::ALL.len())];
                        let behavior = make_movement(&self.profile, shape);
                        started = Some(behavior.clone());
                        self.start(behavior, clock);
                        events.push(Event {
                            shape: Some(shape),
                            cause: Some("proactive".into()),
                            ..self.event(clock, EventKind::ExecuteStart)
                        });
                    }
                }
            }
        }

        let (wheel, led) = match self.state {
            InteractionState::Touched => (WheelCommand::STOP, step(&touch_override(), 0.0, dt).led),
            InteractionState::Executing => {
                let exec = self.execution.as_ref().expect("executing without behavior");
                let out = step(&exec.behavior, clock - exec.started_at, dt);
                if out.done {
                    self.execution = None;
                    self.become_idle(clock);
                    events.push(Event { cause: Some("complete".into()), ..self.event(clock, EventKind::ExecuteDone) });
                    (WheelCommand::STOP, self.ambient(clock))
                } else {
                    (out.wheel, out.led)
                }
            }
            InteractionState::Idle | InteractionState::Observing => (WheelCommand::STOP, self.ambient(clock)),
        };

        TickOutput { state: self.state, phase: self.phase, started, wheel, led, events }
    }

    fn ambient(&self, clock: f64) -> LedCommand {
        self.profile.ambient_light().led_at(clock)
    }

    fn observe(&mut self, motion: Option<MotionDelta>, clock: f64, dt: f64, events: &mut Vec<Event>) {
        if let Some(m) = motion {
            let prev = self.position;
            self.position = (prev.0 + m.dx, prev.1 + m.dy);
            match &mut self.segment {
                Some((_, seg)) => {
                    // clock is monotone, so this only fails on a repeated tick
                    let _ = seg.push(TimedPoint { t: clock, x: self.position.0, y: self.position.1 });
                }
                None if !m.is_still() => {
                    let start = clock - dt;
                    let seg = Trajectory::from_points(vec![
                        TimedPoint { t: start, x: prev.0, y: prev.1 },
                        TimedPoint { t: clock, x: self.position.0, y: self.position.1 },
                    ]);
                    if let Ok(seg) = seg {
                        self.segment = Some((start, seg));
                        if self.state == InteractionState::Idle {
                            self.state = InteractionState::Observing;
                        }
                        events.push(Event { cause: Some("motion".into()), ..self.event(clock, EventKind::ObserveStart) });
                    }
                }
                None => {}
            }
        }
        if self.state == InteractionState::Idle && self.segment.is_some() {
            self.state = InteractionState::Observing;
        }

        let due = matches!(&self.segment, Some((start, _)) if clock - start >= self.segmentation.window - TIME_EPS);
        if !due {
            return;
        }
        let (_, seg) = self.segment.take().expect("segment");
        if self.state == InteractionState::Observing {
            self.become_idle(clock);
        } else {
            self.idle_since = clock;
        }
        if self.segmentation.is_idle(&seg) {
            events.push(Event { cause: Some("below_threshold".into()), ..self.event(clock, EventKind::SegmentIdle) });
            return;
        }
        match self.model.classify(&seg) {
            Ok(pred) => {
                self.pending = Some(pred.class);
                events.push(Event {
                    shape: Some(pred.class),
                    cause: Some(format!("knn:{}", sig9(pred.confidence))),
                    ..self.event(clock, EventKind::Recognized)
                });
            }
            Err(e) => events.push(Event { cause: Some(log_token(&e.to_string())), ..self.event(clock, EventKind::Unrecognized) }),
        }
    }
}
