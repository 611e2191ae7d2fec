use std::collections::VecDeque;

use crate::behavior::{ProfileTable, SocialProfile};
use crate::classifier::default_model;
use crate::geometry::Point;
use crate::hal::Backend;
use crate::planner::{log_token, ArcPhase, ArcSchedule, Event, EventKind, Planner, PlannerConfig, Sensors};
use crate::trajectory::{SegmentationConfig, Trajectory};

use super::script::ScriptInput;
use super::trace::{SessionTrace, TickRecord};
use super::{SimBackend, SimConfig, SimError};

const TIME_EPS: f64 = 1e-9;

/// An external input to the simulated robot.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// Raw touch sensor level; the robot sees it after debouncing.
    Touch(bool),
    /// A hand-drawn path, replayed relative to the robot's position when it
    /// is injected.
    Drag(Trajectory),
    /// Displacement applied during a single tick.
    DragDelta(f64, f64),
    /// `profile <name>`, `schedule <r,c,f>` or `arc.<phase> <seconds>`.
    Config { key: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run until the arc has ended.
    ArcEnd,
    /// Stop `grace` seconds after the last scripted input, or at the arc end
    /// if that comes first.
    AfterScript { grace: f64 },
    /// Run exactly this many ticks.
    Ticks(usize),
}

#[derive(Debug, Clone)]
struct ActiveDrag {
    start: f64,
    /// `(t, x, y)` relative to the first sample.
    path: Vec<(f64, f64, f64)>,
}

impl ActiveDrag {
    fn new(start: f64, traj: &Trajectory) -> Self {
        let p0 = traj.points()[0];
        let path = traj.points().iter().map(|p| (p.t - p0.t, p.x - p0.x, p.y - p0.y)).collect();
        Self { start, path }
    }

    fn duration(&self) -> f64 {
        self.path.last().map_or(0.0, |p| p.0)
    }

    fn offset_at(&self, t: f64) -> Point {
        let s = t - self.start;
        let last = *self.path.last().expect("non-empty drag");
        if s <= 0.0 {
            return (0.0, 0.0);
        }
        if s >= last.0 {
            return (last.1, last.2);
        }
        let i = self.path.partition_point(|p| p.0 <= s) - 1;
        let (a, b) = (self.path[i], self.path[i + 1]);
        let r = (s - a.0) / (b.0 - a.0);
        (a.1 + r * (b.1 - a.1), a.2 + r * (b.2 - a.2))
    }
}

/// A running simulation: planner, behavior engine and virtual robot
/// advanced one fixed tick at a time.
pub struct Session {
    cfg: SimConfig,
    profiles: ProfileTable,
    planner: Planner,
    backend: SimBackend,
    queue: VecDeque<ScriptInput>,
    drags: Vec<ActiveDrag>,
    delta: (f64, f64),
    input_events: Vec<Event>,
    tick_index: usize,
    trace: SessionTrace,
}

impl Session {
    pub fn new(cfg: SimConfig, profiles: ProfileTable, profile: &str, schedule: ArcSchedule) -> Result<Self, SimError> {
        cfg.validate()?;
        schedule.validate()?;
        let active = profiles.get(profile)?.clone();
        active.validate(cfg.max_speed)?;
        let planner = Planner::new(
            default_model(),
            PlannerConfig { profile: active.clone(), schedule, segmentation: SegmentationConfig::default(), seed: cfg.seed },
        );
        let mut backend = SimBackend::new(cfg);
        backend.init()?;
        let trace = SessionTrace::new(&cfg, &profiles, &active.name, &schedule);
        Ok(Self {
            cfg,
            profiles,
            planner,
            backend,
            queue: VecDeque::new(),
            drags: Vec::new(),
            delta: (0.0, 0.0),
            input_events: Vec::new(),
            tick_index: 0,
            trace,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &SocialProfile {
        self.planner.profile()
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    pub fn backend(&self) -> &SimBackend {
        &self.backend
    }

    /// Time of the next tick to run.
    pub fn next_time(&self) -> f64 {
        self.tick_index as f64 * self.cfg.tick
    }

    pub fn ticks(&self) -> usize {
        self.tick_index
    }

    pub fn ended(&self) -> bool {
        self.trace.records.last().is_some_and(|r| r.phase == ArcPhase::Ended)
    }

    pub fn trace(&self) -> &SessionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SessionTrace {
        self.trace
    }

    /// Queue `input` for the first tick at or after `t`. Inputs in the past
    /// apply at the next tick.
    pub fn schedule_input(&mut self, t: f64, input: Input) {
        let at = self.queue.partition_point(|q| q.t <= t);
        self.queue.insert(at, ScriptInput { t, input });
    }

    /// Start replaying `traj` as a drag at the next tick, anchored at the
    /// robot's current position. Empty paths are accepted and ignored.
    pub fn inject_drag_path(&mut self, traj: &Trajectory) -> Result<(), SimError> {
        self.check_drag(traj)?;
        let t = self.next_time();
        self.trace.inputs.push((t, Input::Drag(traj.clone())));
        self.start_drag(t, traj);
        Ok(())
    }

    fn check_drag(&self, traj: &Trajectory) -> Result<(), SimError> {
        let Some(p0) = traj.points().first() else { return Ok(()) };
        let anchor = self.backend.state().position;
        for p in traj.points() {
            let q = (anchor.0 + p.x - p0.x, anchor.1 + p.y - p0.y);
            if !self.cfg.contains(q) {
                return Err(SimError::PathOutOfArena { x: q.0, y: q.1 });
            }
        }
        Ok(())
    }

    fn start_drag(&mut self, t: f64, traj: &Trajectory) {
        if traj.len() >= 2 {
            self.drags.push(ActiveDrag::new(t, traj));
        }
    }

    fn input_event(&self, t: f64, kind: EventKind, cause: String) -> Event {
        Event {
            t,
            state: self.planner.state(),
            phase: self.planner.phase(),
            kind,
            shape: None,
            technique: None,
            cause: Some(log_token(&cause)),
        }
    }

    fn apply(&mut self, t: f64, input: Input) {
        self.trace.inputs.push((t, input.clone()));
        match input {
            Input::Touch(on) => self.backend.set_raw_touch(on),
            Input::Drag(traj) => match self.check_drag(&traj) {
                Ok(()) => self.start_drag(t, &traj),
                Err(e) => {
                    let ev = self.input_event(t, EventKind::DragRejected, e.to_string());
                    self.input_events.push(ev);
                }
            },
            Input::DragDelta(dx, dy) => self.delta = (self.delta.0 + dx, self.delta.1 + dy),
            Input::Config { key, value } => {
                let ev = match self.apply_config(&key, &value) {
                    Ok(()) => self.input_event(t, EventKind::ConfigApplied, format!("{key}:{value}")),
                    Err(msg) => self.input_event(t, EventKind::ConfigRejected, msg),
                };
                self.input_events.push(ev);
            }
        }
    }

    fn apply_config(&mut self, key: &str, value: &str) -> Result<(), String> {
        let secs = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}"));
        let mut sched = *self.planner.schedule();
        match key {
            "profile" => {
                let p = self.profiles.get(value).map_err(|e| e.to_string())?.clone();
                p.validate(self.cfg.max_speed).map_err(|e| e.to_string())?;
                self.planner.set_profile(p);
                return Ok(());
            }
            "schedule" => {
                let parts: Vec<&str> = value.split(',').collect();
                let [r, c, f] = parts[..] else { return Err(format!("bad schedule {value:?}")) };
                sched = ArcSchedule { rising: secs(r)?, climax: secs(c)?, falling: secs(f)? };
            }
            "arc.rising" => sched.rising = secs(value)?,
            "arc.climax" => sched.climax = secs(value)?,
            "arc.falling" => sched.falling = secs(value)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        sched.validate().map_err(|e| e.to_string())?;
        self.planner.set_schedule(sched);
        Ok(())
    }

    /// Run one tick and return its record.
    pub fn step(&mut self) -> Result<&TickRecord, SimError> {
        let t = self.next_time();
        let dt = self.cfg.tick;
        self.backend.set_time(t);
        while self.queue.front().is_some_and(|q| q.t <= t + TIME_EPS) {
            let q = self.queue.pop_front().expect("front");
            self.apply(t, q.input);
        }

        let touch = self.backend.read_touch()?;
        let motion = if self.tick_index == 0 { None } else { Some(self.backend.read_motion()?) };
        let out = self.planner.tick(Sensors { touch, motion }, t, dt);
        self.backend.drive(out.wheel)?;
        self.backend.set_led(out.led)?;

        let state = *self.backend.state();
        let mut events = std::mem::take(&mut self.input_events);
        events.extend(out.events);
        self.trace.records.push(TickRecord {
            t,
            position: state.position,
            velocity: out.wheel.velocity(),
            touched: state.touched,
            led: state.led,
            state: out.state,
            phase: out.phase,
            events,
        });

        let mut drag = std::mem::take(&mut self.delta);
        for d in &self.drags {
            let (a, b) = (d.offset_at(t), d.offset_at(t + dt));
            drag = (drag.0 + b.0 - a.0, drag.1 + b.1 - a.1);
        }
        self.drags.retain(|d| t + dt - d.start < d.duration() - TIME_EPS);
        self.backend.integrate(drag, dt);
        self.tick_index += 1;
        Ok(self.trace.records.last().expect("just pushed"))
    }
}

/// Run a scripted session to completion.
pub fn run_session(
    cfg: SimConfig,
    profiles: &ProfileTable,
    profile: &str,
    schedule: ArcSchedule,
    script: &[ScriptInput],
    stop: StopRule,
) -> Result<SessionTrace, SimError> {
    let mut session = Session::new(cfg, profiles.clone(), profile, schedule)?;
    for s in script {
        session.schedule_input(s.t, s.input.clone());
    }
    let last_input = script.iter().map(|s| s.t).fold(0.0, f64::max);
    loop {
        let done = match stop {
            StopRule::ArcEnd => session.ended(),
            StopRule::AfterScript { grace } => session.ended() || session.next_time() > last_input + grace + TIME_EPS,
            StopRule::Ticks(n) => session.ticks() >= n,
        };
        if done {
            break;
        }
        session.step()?;
    }
    Ok(session.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::shapes::{generate_shape, scaled};
    use crate::classifier::{NoiseProfile, ShapeClass, STROKE_SAMPLES};
    use crate::trajectory::TimedPoint;

    fn short() -> ArcSchedule {
        ArcSchedule::new(20.0, 10.0, 20.0).unwrap()
    }

    #[test]
    fn empty_aloof_session_never_executes() {
        let trace = run_session(SimConfig::default(), &ProfileTable::default(), "aloof", short(), &[], StopRule::ArcEnd).unwrap();
        assert!(trace.records.iter().all(|r| r.state != crate::planner::InteractionState::Executing));
        assert_eq!(trace.records.last().unwrap().phase, ArcPhase::Ended);
        assert!((trace.records.last().unwrap().t - 50.0).abs() < 1e-9);
    }

    #[test]
    fn empty_exuberant_session_self_initiates() {
        let trace = run_session(SimConfig::default(), &ProfileTable::default(), "exuberant", short(), &[], StopRule::ArcEnd).unwrap();
        let first = trace.events().find(|e| e.kind == EventKind::ExecuteStart).expect("proactive start");
        assert!(first.t < 10.0 + 10.0);
        assert_eq!(first.cause.as_deref(), Some("proactive"));
    }

    #[test]
    fn injected_circle_is_recognized() {
        let mut s = Session::new(SimConfig::default(), ProfileTable::default(), "aloof", short()).unwrap();
        for _ in 0..20 {
            s.step().unwrap();
        }
        let circle = scaled(&generate_shape(ShapeClass::Circle, &NoiseProfile::clean(1), STROKE_SAMPLES), 0.3);
        s.inject_drag_path(&circle).unwrap();
        for _ in 0..120 {
            s.step().unwrap();
        }
        let rec = s.trace().events().find(|e| e.kind == EventKind::Recognized).expect("recognized");
        assert_eq!(rec.shape, Some(ShapeClass::Circle));
    }

    #[test]
    fn drag_is_tick_aligned_and_relative() {
        let mut s = Session::new(SimConfig::default(), ProfileTable::default(), "aloof", short()).unwrap();
        let path = Trajectory::from_points(vec![
            TimedPoint { t: 5.0, x: 10.0, y: 10.0 },
            TimedPoint { t: 5.1, x: 10.2, y: 10.0 },
        ])
        .unwrap();
        s.inject_drag_path(&path).unwrap();
        s.step().unwrap();
        s.step().unwrap();
        s.step().unwrap();
        let xs: Vec<f64> = s.trace().records.iter().map(|r| r.position.0).collect();
        assert!((xs[1] - 1.1).abs() < 1e-12 && (xs[2] - 1.2).abs() < 1e-12, "{xs:?}");
        assert!((s.backend().state().position.0 - 1.2).abs() < 1e-12);
    }

    #[test]
    fn drag_out_of_arena_rejected() {
        let mut s = Session::new(SimConfig::default(), ProfileTable::default(), "aloof", short()).unwrap();
        let far = Trajectory::from_points(vec![
            TimedPoint { t: 0.0, x: 0.0, y: 0.0 },
            TimedPoint { t: 0.05, x: 1.5, y: 0.0 },
        ])
        .unwrap();
        assert!(matches!(s.inject_drag_path(&far), Err(SimError::PathOutOfArena { .. })));
        assert!(s.inject_drag_path(&Trajectory::new()).is_ok());

        s.schedule_input(0.0, Input::Drag(far));
        let rec = s.step().unwrap();
        assert_eq!(rec.events[0].kind, EventKind::DragRejected);
    }

    #[test]
    fn config_inputs() {
        let mut s = Session::new(SimConfig::default(), ProfileTable::default(), "exuberant", short()).unwrap();
        s.schedule_input(0.0, Input::Config { key: "profile".into(), value: "aloof".into() });
        s.schedule_input(0.0, Input::Config { key: "volume".into(), value: "11".into() });
        s.schedule_input(0.0, Input::Config { key: "schedule".into(), value: "5,5,5".into() });
        let rec = s.step().unwrap().clone();
        let kinds: Vec<_> = rec.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::ConfigApplied, EventKind::ConfigRejected, EventKind::ConfigApplied]);
        assert_eq!(s.profile().name, "aloof");
        assert_eq!(s.planner().schedule().total(), 15.0);
    }

    #[test]
    fn touch_freezes_robot_and_lights_white() {
        let mut s = Session::new(SimConfig::default(), ProfileTable::default(), "exuberant", short()).unwrap();
        s.schedule_input(11.0, Input::Touch(true));
        s.schedule_input(13.0, Input::Touch(false));
        for _ in 0..400 {
            let r = s.step().unwrap();
            if r.touched {
                assert_eq!(r.velocity, (0.0, 0.0));
                assert_eq!(r.led.color, crate::hal::Rgb::WHITE);
            }
        }
        assert!(s.trace().records.iter().any(|r| r.touched));
    }
}
