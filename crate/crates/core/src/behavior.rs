//! Simple and composed behaviors, social profiles, and the per-tick stepper
//! that turns a behavior into wheel and LED commands.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::OnceLock;

use thiserror::Error;

use crate::classifier::shapes::canonical_path;
use crate::classifier::ShapeClass;
use crate::geometry::Point;
use crate::hal::{Animation, LedCommand, Rgb, WheelCommand, DEFAULT_MAX_SPEED};

/// Brightness of the white light shown while the robot is held.
pub const TOUCH_BRIGHTNESS: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BehaviorError {
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("profile {profile}: {msg}")]
    InvalidProfile { profile: String, msg: String },
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightBehavior {
    pub palette: Vec<Rgb>,
    pub brightness: f64,
    pub animation: Animation,
}

impl LightBehavior {
    pub fn new(palette: Vec<Rgb>, brightness: f64, animation: Animation) -> Result<Self, BehaviorError> {
        if palette.is_empty() {
            return Err(BehaviorError::InvalidBehavior("empty palette".into()));
        }
        if !(brightness.is_finite() && (0.0..=1.0).contains(&brightness)) {
            return Err(BehaviorError::InvalidBehavior(format!("brightness {brightness}")));
        }
        Ok(Self { palette, brightness, animation })
    }

    /// LED output `elapsed` seconds into the behavior. The palette advances
    /// one color per second.
    pub fn led_at(&self, elapsed: f64) -> LedCommand {
        let b = self.brightness;
        let idx = (elapsed.max(0.0).floor() as usize) % self.palette.len();
        let brightness = match self.animation {
            Animation::Solid => b,
            Animation::Blink => {
                if elapsed.rem_euclid(1.0) < 0.5 {
                    b
                } else {
                    0.0
                }
            }
            Animation::Pulse => (b * (0.6 + 0.4 * (TAU * elapsed).sin())).clamp(0.2 * b, b),
        };
        LedCommand { color: self.palette[idx], brightness, animation: self.animation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementBehavior {
    pub shape: ShapeClass,
    /// m/s along the path.
    pub speed: f64,
    /// Largest side of the traced shape's bounding box, in meters.
    pub amplitude: f64,
}

impl MovementBehavior {
    pub fn new(shape: ShapeClass, speed: f64, amplitude: f64, max_speed: f64) -> Result<Self, BehaviorError> {
        if !(speed > 0.0 && speed <= max_speed) {
            return Err(BehaviorError::InvalidBehavior(format!("speed {speed} outside (0, {max_speed}]")));
        }
        if !(amplitude > 0.0 && amplitude <= 0.5) {
            return Err(BehaviorError::InvalidBehavior(format!("amplitude {amplitude} outside (0, 0.5]")));
        }
        Ok(Self { shape, speed, amplitude })
    }

    pub fn path_length(&self) -> f64 {
        shape_path(self.shape).length() * self.amplitude
    }

    /// Seconds needed to trace the shape once.
    pub fn trace_time(&self) -> f64 {
        self.path_length() / self.speed
    }

    /// Offset from the start point after `elapsed` seconds.
    pub fn offset_at(&self, elapsed: f64) -> Point {
        let (x, y) = shape_path(self.shape).point_at(self.speed * elapsed.max(0.0) / self.amplitude);
        (x * self.amplitude, y * self.amplitude)
    }
}

/// Canonical shape with its cumulative arc length, for arc-length lookup.
struct ArcPath {
    points: Vec<Point>,
    cumulative: Vec<f64>,
}

impl ArcPath {
    fn new(points: Vec<Point>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            cumulative.push(acc);
        }
        Self { points, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty path")
    }

    /// Point at arc length `s`, clamped to the path ends.
    fn point_at(&self, s: f64) -> Point {
        if s <= 0.0 {
            return self.points[0];
        }
        if s >= self.length() {
            return *self.points.last().expect("non-empty path");
        }
        let i = self.cumulative.partition_point(|&c| c <= s).max(1) - 1;
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let r = if seg > 0.0 { (s - self.cumulative[i]) / seg } else { 0.0 };
        let (a, b) = (self.points[i], self.points[i + 1]);
        (a.0 + r * (b.0 - a.0), a.1 + r * (b.1 - a.1))
    }
}

fn shape_path(shape: ShapeClass) -> &'static ArcPath {
    static PATHS: OnceLock<Vec<ArcPath>> = OnceLock::new();
    &PATHS.get_or_init(|| ShapeClass::ALL.iter().map(|&c| ArcPath::new(canonical_path(c))).collect())
        [shape.index()]
}

#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorPart {
    Light(LightBehavior),
    Movement(MovementBehavior),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleBehavior {
    pub part: BehaviorPart,
    /// Seconds; `f64::INFINITY` runs until interrupted.
    pub duration: f64,
}

impl SimpleBehavior {
    pub fn new(part: BehaviorPart, duration: f64) -> Result<Self, BehaviorError> {
        if !(duration > 0.0) {
            return Err(BehaviorError::InvalidBehavior(format!("duration {duration}")));
        }
        Ok(Self { part, duration })
    }
}

/// Simple behaviors running together: at most one movement and one light.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComposedBehavior {
    parts: Vec<SimpleBehavior>,
}

impl ComposedBehavior {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a part, replacing any existing part of the same kind.
    pub fn with(mut self, part: SimpleBehavior) -> Self {
        let same_kind = |p: &SimpleBehavior| {
            matches!(
                (&p.part, &part.part),
                (BehaviorPart::Light(_), BehaviorPart::Light(_))
                    | (BehaviorPart::Movement(_), BehaviorPart::Movement(_))
            )
        };
        self.parts.retain(|p| !same_kind(p));
        self.parts.push(part);
        self
    }

    pub fn parts(&self) -> &[SimpleBehavior] {
        &self.parts
    }

    pub fn movement(&self) -> Option<(&MovementBehavior, f64)> {
        self.parts.iter().find_map(|p| match &p.part {
            BehaviorPart::Movement(m) => Some((m, p.duration)),
            _ => None,
        })
    }

    pub fn light(&self) -> Option<(&LightBehavior, f64)> {
        self.parts.iter().find_map(|p| match &p.part {
            BehaviorPart::Light(l) => Some((l, p.duration)),
            _ => None,
        })
    }

    /// Longest part duration.
    pub fn duration(&self) -> f64 {
        self.parts.iter().map(|p| p.duration).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub wheel: WheelCommand,
    pub led: LedCommand,
    pub done: bool,
}

/// Actuator commands for the tick `[elapsed, elapsed + dt)`.
///
/// The wheel command moves the robot from the path point at `elapsed` to the
/// path point at `elapsed + dt`, so integrating the commands at the same
/// `dt` lands exactly on the traced path at every tick boundary.
pub fn step(behavior: &ComposedBehavior, elapsed: f64, dt: f64) -> StepOutput {
    let done = elapsed >= behavior.duration();
    let wheel = match behavior.movement() {
        Some((m, duration)) if !done && elapsed < duration && dt > 0.0 => {
            let a = m.offset_at(elapsed);
            let b = m.offset_at((elapsed + dt).min(duration));
            let cmd = WheelCommand::from_velocity((b.0 - a.0) / dt, (b.1 - a.1) / dt);
            WheelCommand { speed: cmd.speed.min(m.speed), ..cmd }
        }
        _ => WheelCommand::STOP,
    };
    let led = match behavior.light() {
        Some((l, duration)) if elapsed < duration => l.led_at(elapsed),
        _ => LedCommand::OFF,
    };
    StepOutput { wheel, led, done }
}

/// White solid light and no movement until the touch ends.
pub fn touch_override() -> ComposedBehavior {
    let light = LightBehavior { palette: vec![Rgb::WHITE], brightness: TOUCH_BRIGHTNESS, animation: Animation::Solid };
    ComposedBehavior::new().with(SimpleBehavior { part: BehaviorPart::Light(light), duration: f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialProfile {
    pub name: String,
    pub speed: f64,
    pub amplitude: f64,
    pub palette: Vec<Rgb>,
    pub brightness: f64,
    /// Idle seconds before the robot starts a movement on its own; `None`
    /// never does.
    pub proactivity: Option<f64>,
}

impl SocialProfile {
    pub fn validate(&self, max_speed: f64) -> Result<(), BehaviorError> {
        let bad = |msg: String| BehaviorError::InvalidProfile { profile: self.name.clone(), msg };
        MovementBehavior::new(ShapeClass::Line, self.speed, self.amplitude, max_speed).map_err(|e| bad(e.to_string()))?;
        LightBehavior::new(self.palette.clone(), self.brightness, Animation::Pulse).map_err(|e| bad(e.to_string()))?;
        if let Some(p) = self.proactivity {
            if !(p.is_finite() && p > 0.0) {
                return Err(bad(format!("proactivity {p}")));
            }
        }
        Ok(())
    }

    /// Background light while idle: the profile palette, pulsing.
    pub fn ambient_light(&self) -> LightBehavior {
        LightBehavior { palette: self.palette.clone(), brightness: self.brightness, animation: Animation::Pulse }
    }
}

pub const PRESET_NAMES: [&str; 3] = ["exuberant", "aloof", "harmonious"];

pub fn profile_preset(name: &str) -> Result<SocialProfile, BehaviorError> {
    let p = |speed, amplitude, palette: [Rgb; 2], brightness, proactivity| SocialProfile {
        name: name.to_ascii_lowercase(),
        speed,
        amplitude,
        palette: palette.to_vec(),
        brightness,
        proactivity,
    };
    match name.to_ascii_lowercase().as_str() {
        "exuberant" => Ok(p(0.25, 0.20, [Rgb(128, 0, 128), Rgb(255, 0, 0)], 0.9, Some(10.0))),
        "aloof" => Ok(p(0.08, 0.06, [Rgb(0, 128, 0), Rgb(0, 0, 255)], 0.3, None)),
        "harmonious" => Ok(p(0.16, 0.12, [Rgb(255, 200, 0), Rgb(255, 128, 0)], 0.6, Some(25.0))),
        _ => Err(BehaviorError::UnknownProfile(name.to_string())),
    }
}

/// Movement tracing `shape` once with the profile's speed and amplitude,
/// lit by the profile's pulsing palette.
pub fn make_movement(profile: &SocialProfile, shape: ShapeClass) -> ComposedBehavior {
    let movement = MovementBehavior { shape, speed: profile.speed, amplitude: profile.amplitude };
    let duration = movement.trace_time();
    ComposedBehavior::new()
        .with(SimpleBehavior { part: BehaviorPart::Movement(movement), duration })
        .with(SimpleBehavior { part: BehaviorPart::Light(profile.ambient_light()), duration })
}

/// Named profiles: the three presets plus any defined in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    profiles: BTreeMap<String, SocialProfile>,
}

impl Default for ProfileTable {
    fn default() -> Self {
        let profiles = PRESET_NAMES
            .iter()
            .map(|n| (n.to_string(), profile_preset(n).expect("preset")))
            .collect();
        Self { profiles }
    }
}

impl ProfileTable {
    pub fn get(&self, name: &str) -> Result<&SocialProfile, BehaviorError> {
        self.profiles
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| BehaviorError::UnknownProfile(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn insert(&mut self, profile: SocialProfile) -> Result<(), BehaviorError> {
        profile.validate(DEFAULT_MAX_SPEED)?;
        self.profiles.insert(profile.name.clone(), profile);
        Ok(())
    }

    /// The table as `name.field = value` lines accepted by
    /// [`EngineConfig::parse`].
    pub fn to_config_lines(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (name, p) in &self.profiles {
            out.push((format!("{name}.speed"), p.speed.to_string()));
            out.push((format!("{name}.amplitude"), p.amplitude.to_string()));
            out.push((format!("{name}.palette"), format_palette(&p.palette)));
            out.push((format!("{name}.brightness"), p.brightness.to_string()));
            let pro = p.proactivity.map_or_else(|| "inf".to_string(), |v| v.to_string());
            out.push((format!("{name}.proactivity"), pro));
        }
        out
    }

    /// Apply one `<profile>.<field>` setting. Unknown profile names start a
    /// new profile; it must define every field before [`Self::finish`].
    fn set(&mut self, pending: &mut BTreeMap<String, PartialProfile>, name: &str, field: &str, value: &str) -> Result<(), String> {
        let entry = pending.entry(name.to_string()).or_insert_with(|| match self.profiles.get(name) {
            Some(p) => PartialProfile::from(p.clone()),
            None => PartialProfile { name: name.to_string(), ..Default::default() },
        });
        let number = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        match field {
            "speed" => entry.speed = Some(number(value)?),
            "amplitude" => entry.amplitude = Some(number(value)?),
            "brightness" => entry.brightness = Some(number(value)?),
            "palette" => entry.palette = Some(parse_palette(value)?),
            "proactivity" => {
                entry.proactivity = Some(match value {
                    "inf" | "never" | "none" => None,
                    v => Some(number(v)?),
                })
            }
            other => return Err(format!("unknown profile field {other:?}")),
        }
        Ok(())
    }

    fn finish(&mut self, pending: BTreeMap<String, PartialProfile>) -> Result<(), BehaviorError> {
        for (name, partial) in pending {
            let profile = partial.complete().map_err(|msg| BehaviorError::InvalidProfile { profile: name.clone(), msg })?;
            self.insert(profile)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct PartialProfile {
    name: String,
    speed: Option<f64>,
    amplitude: Option<f64>,
    palette: Option<Vec<Rgb>>,
    brightness: Option<f64>,
    proactivity: Option<Option<f64>>,
}

impl From<SocialProfile> for PartialProfile {
    fn from(p: SocialProfile) -> Self {
        Self {
            name: p.name,
            speed: Some(p.speed),
            amplitude: Some(p.amplitude),
            palette: Some(p.palette),
            brightness: Some(p.brightness),
            proactivity: Some(p.proactivity),
        }
    }
}

impl PartialProfile {
    fn complete(self) -> Result<SocialProfile, String> {
        let missing = |f: &str| format!("missing field {f}");
        Ok(SocialProfile {
            speed: self.speed.ok_or_else(|| missing("speed"))?,
            amplitude: self.amplitude.ok_or_else(|| missing("amplitude"))?,
            palette: self.palette.ok_or_else(|| missing("palette"))?,
            brightness: self.brightness.ok_or_else(|| missing("brightness"))?,
            proactivity: self.proactivity.ok_or_else(|| missing("proactivity"))?,
            name: self.name,
        })
    }
}

/// `r,g,b` triples separated by `;`, e.g. `128,0,128; 255,0,0`.
pub fn parse_palette(value: &str) -> Result<Vec<Rgb>, String> {
    let colors = value
        .split(';')
        .map(|c| {
            let ch: Vec<u8> = c
                .trim()
                .split(',')
                .map(|v| v.trim().parse::<u8>().map_err(|e| format!("{v:?}: {e}")))
                .collect::<Result<_, _>>()?;
            match ch[..] {
                [r, g, b] => Ok(Rgb(r, g, b)),
                _ => Err(format!("color {c:?} needs three channels")),
            }
        })
        .collect::<Result<Vec<_>, String>>()?;
    if colors.is_empty() {
        return Err("empty palette".into());
    }
    Ok(colors)
}

pub fn format_palette(palette: &[Rgb]) -> String {
    palette.iter().map(Rgb::to_string).collect::<Vec<_>>().join(";")
}

/// Parsed `key = value` config file.
///
/// Keys:
/// * `<profile>.speed`, `.amplitude`, `.brightness` (numbers),
///   `.palette` (`r,g,b; r,g,b`), `.proactivity` (seconds, or `inf`).
///   A name other than `exuberant`, `aloof` or `harmonious` defines a new
///   profile and must set all five fields.
/// * `arc.rising`, `arc.climax`, `arc.falling` (seconds).
///
/// Blank lines and `#` comments are ignored; any other key is an error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EngineConfig {
    pub profiles: ProfileTable,
    pub arc: crate::planner::ArcSchedule,
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self, BehaviorError> {
        let mut cfg = EngineConfig::default();
        let mut pending = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| BehaviorError::Config { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
            let (scope, field) = key.split_once('.').ok_or_else(|| err(format!("unknown key {key:?}")))?;
            if scope == "arc" {
                let secs = value.parse::<f64>().map_err(|e| err(format!("{value:?}: {e}")))?;
                match field {
                    "rising" => cfg.arc.rising = secs,
                    "climax" => cfg.arc.climax = secs,
                    "falling" => cfg.arc.falling = secs,
                    _ => return Err(err(format!("unknown key {key:?}"))),
                }
            } else if !scope.is_empty() && scope.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                cfg.profiles.set(&mut pending, scope, field, value).map_err(err)?;
            } else {
                return Err(err(format!("unknown key {key:?}")));
            }
        }
        cfg.arc.validate().map_err(|e| BehaviorError::Config { line: 0, msg: e.to_string() })?;
        cfg.profiles.finish(pending)?;
        Ok(cfg)
    }
}
