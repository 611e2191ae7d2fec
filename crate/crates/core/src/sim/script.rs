use std::path::Path;

use crate::classifier::shapes::{generate_shape, scaled};
use crate::classifier::{NoiseProfile, ShapeClass, STROKE_SAMPLES};
use crate::trajectory::Trajectory;

use super::session::Input;
use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptInput {
    pub t: f64,
    pub input: Input,
}

/// Timed inputs in time order.
pub type Script = Vec<ScriptInput>;

/// Parse a session script. One input per line, `#` starts a comment:
///
/// ```text
/// 15    touch on
/// 15.1  drag_shape circle 0.3          # class, size in meters
/// 40    drag_shape spike 0.25 7 mouse  # optional seed and noise
/// 60    drag_file strokes/loop.txt     # `t x y` lines, relative to base_dir
/// 61    drag_delta 0.01 0
/// 90    config profile aloof
/// 18.2  touch off
/// ```
///
/// Inputs are sorted by time; lines with equal times keep file order.
pub fn parse_script(text: &str, base_dir: Option<&Path>) -> Result<Script, SimError> {
    let mut script = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| SimError::Script { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(err("expected `<t> <command> ...`".into()));
        }
        let t: f64 = fields[0].parse().map_err(|_| err(format!("bad time {:?}", fields[0])))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(err(format!("bad time {t}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        let input = match (fields[1], &fields[2..]) {
            ("touch", ["on"]) => Input::Touch(true),
            ("touch", ["off"]) => Input::Touch(false),
            ("drag_shape", [class, size, rest @ ..]) if rest.len() <= 2 => {
                let class: ShapeClass = class.parse().map_err(|e| err(format!("{e}")))?;
                let size = num(size)?;
                if !(size > 0.0 && size.is_finite()) {
                    return Err(err(format!("bad size {size}")));
                }
                let seed = match rest.first() {
                    Some(s) => s.parse::<u64>().map_err(|_| err(format!("bad seed {s:?}")))?,
                    None => 0,
                };
                let noise = NoiseProfile::preset(rest.get(1).copied().unwrap_or("clean"), seed)
                    .map_err(|e| err(e.to_string()))?;
                Input::Drag(scaled(&generate_shape(class, &noise, STROKE_SAMPLES), size))
            }
            ("drag_file", [path]) => {
                let full = base_dir.map_or_else(|| Path::new(path).to_path_buf(), |d| d.join(path));
                let text = std::fs::read_to_string(&full).map_err(|e| err(format!("{}: {e}", full.display())))?;
                Input::Drag(Trajectory::parse(&text).map_err(|e| err(format!("{}: {e}", full.display())))?)
            }
            ("drag_delta", [dx, dy]) => {
                let (dx, dy) = (num(dx)?, num(dy)?);
                if !(dx.is_finite() && dy.is_finite()) {
                    return Err(err("non-finite drag".into()));
                }
                Input::DragDelta(dx, dy)
            }
            ("config", [key, value]) => Input::Config { key: key.to_string(), value: value.to_string() },
            (cmd, _) => return Err(err(format!("unknown or malformed command {cmd:?}"))),
        };
        script.push(ScriptInput { t, input });
    }
    script.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(script)
}
