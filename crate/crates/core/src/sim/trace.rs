//! Trace files.
//!
//! ```text
//! #cfg tick=0.05
//! #cfg ... (arena, seed, model, active profile, arc, profile table)
//! #cfg input=touch@15:on
//! #cfg input=drag@15.1:0,1,1;0.05,1.01,1.002;...
//! 0 1 1 0 0 0 255 200 0 0.36 idle rising
//! 0.05 1 1 0 0 0 255 200 0 0.437 idle rising event=...
//! ...
//! #end ticks=6001
//! ```
//!
//! Tick fields: `t x y vx vy touched led_r led_g led_b led_bright state
//! phase`, then one token per event. Floats carry 9 significant digits;
//! inputs use the shortest text that round-trips exactly, so a replay
//! reproduces the session bit for bit.

use std::fmt::Write as _;

use crate::behavior::{EngineConfig, ProfileTable};
use crate::geometry::Point;
use crate::hal::LedCommand;
use crate::planner::{ArcPhase, ArcSchedule, Event, InteractionState};
use crate::text::sig9;
use crate::trajectory::{TimedPoint, Trajectory};

use super::session::{run_session, Input, StopRule};
use super::script::ScriptInput;
use super::{SimConfig, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    /// Position at the start of the tick.
    pub position: Point,
    /// Wheel velocity commanded for the tick.
    pub velocity: (f64, f64),
    /// Debounced touch state seen by the planner.
    pub touched: bool,
    pub led: LedCommand,
    pub state: InteractionState,
    pub phase: ArcPhase,
    pub events: Vec<Event>,
}

impl TickRecord {
    pub fn line(&self) -> String {
        let mut s = String::new();
        let l = &self.led;
        write!(
            s,
            "{} {} {} {} {} {} {} {} {} {} {} {}",
            sig9(self.t),
            sig9(self.position.0),
            sig9(self.position.1),
            sig9(self.velocity.0),
            sig9(self.velocity.1),
            u8::from(self.touched),
            l.color.0,
            l.color.1,
            l.color.2,
            sig9(l.brightness),
            self.state,
            self.phase
        )
        .expect("write to string");
        for e in &self.events {
            write!(s, " event={},state={}", e.kind.name(), e.state).expect("write to string");
            if let Some(shape) = e.shape {
                write!(s, ",shape={shape}").expect("write to string");
            }
            if let Some(t) = e.technique {
                write!(s, ",technique={t}").expect("write to string");
            }
            if let Some(c) = &e.cause {
                write!(s, ",cause={c}").expect("write to string");
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub header: Vec<(String, String)>,
    /// Inputs as applied, keyed by tick time.
    pub inputs: Vec<(f64, Input)>,
    pub records: Vec<TickRecord>,
}

impl SessionTrace {
    pub(super) fn new(cfg: &SimConfig, profiles: &ProfileTable, profile: &str, schedule: &ArcSchedule) -> Self {
        let mut header: Vec<(String, String)> = vec![
            ("tick".into(), cfg.tick.to_string()),
            ("arena_width".into(), cfg.arena_width.to_string()),
            ("arena_height".into(), cfg.arena_height.to_string()),
            ("max_speed".into(), cfg.max_speed.to_string()),
            ("seed".into(), cfg.seed.to_string()),
            ("model".into(), "default".into()),
            ("profile".into(), profile.to_string()),
            ("arc.rising".into(), schedule.rising.to_string()),
            ("arc.climax".into(), schedule.climax.to_string()),
            ("arc.falling".into(), schedule.falling.to_string()),
        ];
        header.extend(profiles.to_config_lines().into_iter().map(|(k, v)| (format!("def.{k}"), v)));
        Self { header, inputs: Vec::new(), records: Vec::new() }
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().flat_map(|r| &r.events)
    }

    /// Planner events, one `t=... state=... ` line each.
    pub fn event_log(&self) -> String {
        self.events().map(|e| format!("{e}\n")).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.header {
            writeln!(s, "#cfg {k}={v}").expect("write to string");
        }
        for (t, input) in &self.inputs {
            writeln!(s, "#cfg input={}", format_input(*t, input)).expect("write to string");
        }
        for r in &self.records {
            s.push_str(&r.line());
            s.push('\n');
        }
        writeln!(s, "#end ticks={}", self.records.len()).expect("write to string");
        s
    }
}

fn format_input(t: f64, input: &Input) -> String {
    match input {
        Input::Touch(on) => format!("touch@{t}:{}", if *on { "on" } else { "off" }),
        Input::Drag(traj) => {
            let pts: Vec<String> = traj.points().iter().map(|p| format!("{},{},{}", p.t, p.x, p.y)).collect();
            format!("drag@{t}:{}", pts.join(";"))
        }
        Input::DragDelta(dx, dy) => format!("drag_delta@{t}:{dx},{dy}"),
        Input::Config { key, value } => format!("config@{t}:{key}={value}"),
    }
}

fn parse_input(text: &str) -> Result<(f64, Input), String> {
    let (kind, rest) = text.split_once('@').ok_or("missing '@'")?;
    let (t, body) = rest.split_once(':').ok_or("missing ':'")?;
    let t: f64 = t.parse().map_err(|_| format!("bad time {t:?}"))?;
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
    let input = match kind {
        "touch" => match body {
            "on" => Input::Touch(true),
            "off" => Input::Touch(false),
            _ => return Err(format!("bad touch {body:?}")),
        },
        "drag" => {
            let mut pts = Vec::new();
            for p in body.split(';').filter(|p| !p.is_empty()) {
                let v: Vec<&str> = p.split(',').collect();
                let [pt, px, py] = v[..] else { return Err(format!("bad drag point {p:?}")) };
                pts.push(TimedPoint::new(num(pt)?, num(px)?, num(py)?).map_err(|e| e.to_string())?);
            }
            Input::Drag(Trajectory::from_points(pts).map_err(|e| e.to_string())?)
        }
        "drag_delta" => {
            let (dx, dy) = body.split_once(',').ok_or("bad drag_delta")?;
            Input::DragDelta(num(dx)?, num(dy)?)
        }
        "config" => {
            let (key, value) = body.split_once('=').ok_or("bad config")?;
            Input::Config { key: key.into(), value: value.into() }
        }
        _ => return Err(format!("unknown input {kind:?}")),
    };
    Ok((t, input))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Zero-based tick index.
    pub tick: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub ticks: usize,
    pub first_divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Re-run the session described by a trace file and compare every tick.
pub fn replay(text: &str) -> Result<ReplayReport, SimError> {
    let mut header = Vec::new();
    let mut inputs = Vec::new();
    let mut ticks: Vec<&str> = Vec::new();
    let mut end = None;
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        let bad = |msg: String| SimError::MalformedTrace { line: i + 1, msg };
        if line.trim().is_empty() {
            continue;
        }
        if end.is_some() {
            return Err(bad("content after #end".into()));
        }
        if let Some(n) = line.strip_prefix("#end ticks=") {
            end = Some(n.parse::<usize>().map_err(|_| bad(format!("bad tick count {n:?}")))?);
        } else if let Some(kv) = line.strip_prefix("#cfg ") {
            if !ticks.is_empty() {
                return Err(bad("#cfg after tick records".into()));
            }
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
            if k == "input" {
                let (t, input) = parse_input(v).map_err(bad)?;
                inputs.push(ScriptInput { t, input });
            } else {
                header.push((k.to_string(), v.to_string()));
            }
        } else {
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() < 12 {
                return Err(bad(format!("expected at least 12 fields, got {}", fields.len())));
            }
            let t: f64 = fields[0].parse().map_err(|_| bad(format!("bad time {:?}", fields[0])))?;
            if t <= last_t {
                return Err(bad("tick times must increase".into()));
            }
            last_t = t;
            ticks.push(line);
        }
    }
    let n = end.ok_or(SimError::MalformedTrace { line: text.lines().count(), msg: "missing #end (truncated)".into() })?;
    if n != ticks.len() {
        return Err(SimError::MalformedTrace {
            line: text.lines().count(),
            msg: format!("#end says {n} ticks, found {}", ticks.len()),
        });
    }

    let get = |k: &str| {
        header
            .iter()
            .find(|(hk, _)| hk == k)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| SimError::MalformedTrace { line: 0, msg: format!("missing #cfg {k}") })
    };
    let num = |k: &str| -> Result<f64, SimError> {
        get(k)?.parse().map_err(|_| SimError::MalformedTrace { line: 0, msg: format!("bad #cfg {k}") })
    };
    if get("model")? != "default" {
        return Err(SimError::MalformedTrace { line: 0, msg: "only model=default can be replayed".into() });
    }
    let cfg = SimConfig {
        tick: num("tick")?,
        arena_width: num("arena_width")?,
        arena_height: num("arena_height")?,
        max_speed: num("max_speed")?,
        seed: get("seed")?.parse().map_err(|_| SimError::MalformedTrace { line: 0, msg: "bad #cfg seed".into() })?,
    };
    let schedule = ArcSchedule { rising: num("arc.rising")?, climax: num("arc.climax")?, falling: num("arc.falling")? };
    let defs: String = header
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("def.").map(|k| format!("{k} = {v}\n")))
        .collect();
    let profiles = EngineConfig::parse(&defs)?.profiles;

    let fresh = run_session(cfg, &profiles, get("profile")?, schedule, &inputs, StopRule::Ticks(n))?;
    let first_divergence = ticks.iter().zip(&fresh.records).enumerate().find_map(|(i, (want, got))| {
        let got = got.line();
        (*want != got).then(|| Divergence { tick: i, expected: want.to_string(), actual: got })
    });
    Ok(ReplayReport { ticks: n, first_divergence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::parse_script;

    fn scenario() -> SessionTrace {
        let script = parse_script(
            "2 touch on\n2.1 drag_shape circle 0.3 4 mouse\n5.3 touch off\n9 config profile harmonious\n",
            None,
        )
        .unwrap();
        let sched = ArcSchedule::new(8.0, 4.0, 4.0).unwrap();
        run_session(SimConfig { seed: 3, ..Default::default() }, &ProfileTable::default(), "aloof", sched, &script, StopRule::ArcEnd)
            .unwrap()
    }

    #[test]
    fn round_trip_replays_clean() {
        let trace = scenario();
        let text = trace.to_text();
        assert_eq!(text, scenario().to_text());
        let report = replay(&text).unwrap();
        assert_eq!(report.ticks, trace.records.len());
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn tampered_led_diverges_at_that_tick() {
        let text = scenario().to_text();
        let lines: Vec<&str> = text.lines().collect();
        let first_tick = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        let target = first_tick + 40;
        let mut fields: Vec<String> = lines[target].split(' ').map(String::from).collect();
        fields[6] = if fields[6] == "7" { "8".into() } else { "7".into() };
        let mut tampered: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        tampered[target] = fields.join(" ");
        let report = replay(&(tampered.join("\n") + "\n")).unwrap();
        assert_eq!(report.first_divergence.unwrap().tick, 40);
    }

    #[test]
    fn truncated_trace_is_malformed() {
        let text = scenario().to_text();
        let cut: String = text.lines().take(text.lines().count() / 2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(replay(&cut), Err(SimError::MalformedTrace { .. })));
        let partial = &text[..text.len() - 3];
        assert!(matches!(replay(partial), Err(SimError::MalformedTrace { .. })));
        assert!(matches!(replay("garbage"), Err(SimError::MalformedTrace { .. })));
    }

    #[test]
    fn input_text_round_trip() {
        let inputs = [
            (1.5, Input::Touch(true)),
            (0.1 + 0.2, Input::DragDelta(1.0 / 3.0, -2e-7)),
            (4.0, Input::Config { key: "profile".into(), value: "aloof".into() }),
            (
                7.0,
                Input::Drag(
                    Trajectory::from_points(vec![TimedPoint { t: 0.0, x: 0.1, y: 0.7 }, TimedPoint { t: 0.05, x: 0.3, y: 1.0 / 7.0 }])
                        .unwrap(),
                ),
            ),
        ];
        for (t, input) in inputs {
            assert_eq!(parse_input(&format_input(t, &input)).unwrap(), (t, input));
        }
    }

    #[test]
    fn records_are_dense_and_contained() {
        let trace = scenario();
        for (i, r) in trace.records.iter().enumerate() {
            assert!((r.t - i as f64 * 0.05).abs() < 1e-9);
            assert!(SimConfig::default().contains(r.position));
        }
    }
}
