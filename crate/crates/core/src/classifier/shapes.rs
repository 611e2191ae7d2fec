//! The six movement shapes and seeded synthetic stroke generators.
//!
//! Generators trace a parametric path, then apply a random rotation, mirror
//! and per-shape proportions. Noisy profiles add drawing imprecision
//! (uneven speed, open or overdrawn circles, bowed lines), smooth Gaussian
//! positional wobble and sample dropout. All randomness comes from a ChaCha stream seeded by the
//! caller, so a `(class, seed)` pair always produces the same stroke.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::features::resample;
use crate::geometry::Point;
use crate::trajectory::{TimedPoint, Trajectory};

/// Sample period of generated strokes, matching the 20 Hz simulator tick.
pub const SAMPLE_PERIOD: f64 = 0.05;

/// Vertices of the dense polyline each parametric shape is built from.
const DENSE_POINTS: usize = 400;

/// Correlation length of the positional jitter, in samples. Hand and wheel
/// wobble is smooth over a few samples rather than white.
const WOBBLE_SAMPLES: f64 = 2.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeClass {
    Circle,
    Rect,
    Loop,
    Curl,
    Spike,
    Line,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 6] = [
        ShapeClass::Circle,
        ShapeClass::Rect,
        ShapeClass::Loop,
        ShapeClass::Curl,
        ShapeClass::Spike,
        ShapeClass::Line,
    ];

    /// Stable ordinal used for serialization and confusion-matrix indexing.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Circle => "circle",
            ShapeClass::Rect => "rect",
            ShapeClass::Loop => "loop",
            ShapeClass::Curl => "curl",
            ShapeClass::Spike => "spike",
            ShapeClass::Line => "line",
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown shape class {0:?}")]
pub struct UnknownShape(pub String);

impl FromStr for ShapeClass {
    type Err = UnknownShape;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownShape(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("jitter_sigma must be finite and >= 0, got {0}")]
    Sigma(f64),
    #[error("drop_rate must be in [0, 0.5], got {0}")]
    DropRate(f64),
    #[error("unknown noise preset {0:?} (expected mouse, robot, train or a sigma value)")]
    Preset(String),
}

/// Sensor-condition model for generated strokes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProfile {
    /// Jitter standard deviation as a fraction of the shape's extent.
    pub jitter_sigma: f64,
    /// Probability that an interior sample is omitted.
    pub drop_rate: f64,
    pub seed: u64,
}

impl NoiseProfile {
    pub fn new(jitter_sigma: f64, drop_rate: f64, seed: u64) -> Result<Self, NoiseError> {
        if !(jitter_sigma.is_finite() && jitter_sigma >= 0.0) {
            return Err(NoiseError::Sigma(jitter_sigma));
        }
        if !(0.0..=0.5).contains(&drop_rate) {
            return Err(NoiseError::DropRate(drop_rate));
        }
        Ok(Self { jitter_sigma, drop_rate, seed })
    }

    pub fn clean(seed: u64) -> Self {
        Self { jitter_sigma: 0.0, drop_rate: 0.0, seed }
    }

    /// Pointer strokes: light jitter, no dropout.
    pub fn mouse(seed: u64) -> Self {
        Self { jitter_sigma: 0.01, drop_rate: 0.0, seed }
    }

    /// Optical sensor on the physical robot: heavy jitter and dropped samples.
    pub fn robot(seed: u64) -> Self {
        Self { jitter_sigma: 0.05, drop_rate: 0.1, seed }
    }

    /// Condition the default training corpus is generated at.
    pub fn training(seed: u64) -> Self {
        Self { jitter_sigma: 0.02, drop_rate: 0.0, seed }
    }

    /// `mouse`, `robot`, `train` or a bare sigma such as `0.03`.
    pub fn preset(name: &str, seed: u64) -> Result<Self, NoiseError> {
        match name.to_ascii_lowercase().as_str() {
            "mouse" => Ok(Self::mouse(seed)),
            "robot" => Ok(Self::robot(seed)),
            "train" | "training" => Ok(Self::training(seed)),
            "clean" | "none" => Ok(Self::clean(seed)),
            other => match other.parse::<f64>() {
                Ok(sigma) => Self::new(sigma, 0.0, seed),
                Err(_) => Err(NoiseError::Preset(name.to_string())),
            },
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Per-stroke proportions. `canonical` is what the behavior engine executes.
#[derive(Debug, Clone, Copy)]
struct ShapeParams {
    /// Minor/major ratio of the circle.
    ellipse: f64,
    /// Height/width of the rectangle.
    rect_ratio: f64,
    /// Where along the bottom edge the rectangle starts, as a width fraction.
    rect_start: f64,
    /// Corner rounding radius of the rectangle relative to its width.
    rect_rounding: f64,
    loops: usize,
    /// Pen distance from the rolling circle's center relative to its radius.
    loop_reach: f64,
    curl_turns: f64,
    teeth: usize,
    /// Relative height of each spike tooth; only the first `teeth` are used.
    tooth_heights: [f64; 4],
    start_angle: f64,
    /// Fraction of a full revolution drawn for the circle.
    circle_sweep: f64,
    /// Sagitta of the line's bow relative to its length.
    line_bow: f64,
    /// Amplitude of drawing-speed variation along the stroke.
    speed_wobble: f64,
    speed_phase: f64,
}

impl ShapeParams {
    fn canonical() -> Self {
        Self {
            ellipse: 1.0,
            rect_ratio: 0.6,
            rect_start: 0.5,
            rect_rounding: 0.0,
            loops: 3,
            loop_reach: 2.0,
            curl_turns: 1.75,
            teeth: 3,
            tooth_heights: [1.0; 4],
            start_angle: 0.0,
            circle_sweep: 1.0,
            line_bow: 0.0,
            speed_wobble: 0.0,
            speed_phase: 0.0,
        }
    }

    /// Random proportions. Drawing imprecision (open or overdrawn circles,
    /// bowed lines, uneven speed) only applies to noisy strokes, so a
    /// noiseless profile yields the exact parametric shape.
    fn random(rng: &mut ChaCha8Rng, sloppy: bool) -> Self {
        let mut p = Self {
            ellipse: rng.random_range(0.8..=1.0),
            rect_ratio: rng.random_range(0.45..=0.95),
            rect_start: rng.random_range(0.3..=0.7),
            rect_rounding: rng.random_range(0.0..=0.06),
            loops: rng.random_range(2..=3),
            loop_reach: rng.random_range(1.6..=2.4),
            curl_turns: rng.random_range(1.5..=2.0),
            teeth: rng.random_range(3..=4),
            tooth_heights: [(); 4].map(|_| rng.random_range(0.6..=1.0)),
            start_angle: rng.random_range(0.0..TAU),
            circle_sweep: rng.random_range(0.9..=1.08),
            line_bow: rng.random_range(-0.05..=0.05),
            speed_wobble: rng.random_range(0.0..=0.3),
            speed_phase: rng.random_range(0.0..TAU),
        };
        if !sloppy {
            p.circle_sweep = 1.0;
            p.line_bow = 0.0;
            p.speed_wobble = 0.0;
        }
        p
    }
}

fn dense_path(class: ShapeClass, p: &ShapeParams) -> Vec<Point> {
    let n = DENSE_POINTS;
    let u = |i: usize| i as f64 / (n - 1) as f64;
    match class {
        ShapeClass::Circle => (0..n)
            .map(|i| {
                let a = p.start_angle + TAU * p.circle_sweep * u(i);
                (a.cos(), p.ellipse * a.sin())
            })
            .collect(),
        ShapeClass::Rect => {
            let (w, h) = (1.0, p.rect_ratio);
            let s = p.rect_start * w;
            let corners = [(s, 0.0), (w, 0.0), (w, h), (0.0, h), (0.0, 0.0), (s, 0.0)];
            if p.rect_rounding > 0.0 {
                rounded_polyline(&corners, p.rect_rounding.min(h / 2.0), n)
            } else {
                polyline(&corners, n)
            }
        }
        ShapeClass::Loop => {
            // epitrochoid: a circle rolling once around a ring draws one
            // loop per revolution and ends where it started
            let m = p.loops as f64 + 1.0;
            (0..n)
                .map(|i| {
                    let a = TAU * u(i);
                    (m * a.cos() - p.loop_reach * (m * a).cos(), m * a.sin() - p.loop_reach * (m * a).sin())
                })
                .collect()
        }
        ShapeClass::Curl => (0..n)
            .map(|i| {
                let r = 0.1 + 0.9 * u(i);
                let a = p.start_angle + TAU * p.curl_turns * u(i);
                (r * a.cos(), r * a.sin())
            })
            .collect(),
        ShapeClass::Spike => {
            let m = p.teeth;
            let mut corners = Vec::with_capacity(2 * m + 1);
            for k in 0..=2 * m {
                let x = k as f64 / (2 * m) as f64;
                let y = if k % 2 == 1 { p.tooth_heights[k / 2] } else { 0.0 };
                corners.push((x, y));
            }
            polyline(&corners, n)
        }
        ShapeClass::Line => (0..n)
            .map(|i| (u(i), 4.0 * p.line_bow * u(i) * (1.0 - u(i))))
            .collect(),
    }
}

/// Densely sampled straight segments through `corners`, keeping each corner.
fn polyline(corners: &[Point], n: usize) -> Vec<Point> {
    let per_edge = (n / (corners.len() - 1)).max(2);
    let mut out = Vec::with_capacity(n + corners.len());
    for w in corners.windows(2) {
        for j in 0..per_edge {
            let r = j as f64 / per_edge as f64;
            out.push((w[0].0 + r * (w[1].0 - w[0].0), w[0].1 + r * (w[1].1 - w[0].1)));
        }
    }
    out.push(corners[corners.len() - 1]);
    out
}

/// `n` samples along the path where the drawing speed varies sinusoidally
/// (once per stroke) by up to `speed_wobble` around its mean.
fn warp_speed(path: &[Point], n: usize, p: &ShapeParams) -> Vec<Point> {
    let dense = resample(path, DENSE_POINTS);
    // cumulative arc fraction reached at each of the n sample times
    let speed = |u: f64| 1.0 + p.speed_wobble * (TAU * u + p.speed_phase).sin();
    let steps = 4 * n;
    let mut cum = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for j in 0..steps {
        acc += speed((j as f64 + 0.5) / steps as f64);
        cum.push(acc);
    }
    (0..n)
        .map(|i| {
            let frac = cum[i * 4] / acc;
            let pos = frac * (DENSE_POINTS - 1) as f64;
            let lo = (pos.floor() as usize).min(DENSE_POINTS - 2);
            let r = pos - lo as f64;
            let (a, b) = (dense[lo], dense[lo + 1]);
            (a.0 + r * (b.0 - a.0), a.1 + r * (b.1 - a.1))
        })
        .collect()
}

/// Like [`polyline`] but interior corners are replaced by circular arcs of
/// radius `r`.
fn rounded_polyline(corners: &[Point], r: f64, n: usize) -> Vec<Point> {
    let mut pts = vec![corners[0]];
    for w in corners.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let la = (b.0 - a.0).hypot(b.1 - a.1);
        let lc = (c.0 - b.0).hypot(c.1 - b.1);
        let ua = ((b.0 - a.0) / la, (b.1 - a.1) / la);
        let uc = ((c.0 - b.0) / lc, (c.1 - b.1) / lc);
        let turn = (ua.0 * uc.1 - ua.1 * uc.0).atan2(ua.0 * uc.0 + ua.1 * uc.1);
        let cut = r * (turn.abs() / 2.0).tan();
        let start = (b.0 - ua.0 * cut, b.1 - ua.1 * cut);
        // arc center sits r to the inside of the incoming edge
        let side = turn.signum();
        let center = (start.0 - side * ua.1 * r, start.1 + side * ua.0 * r);
        let a0 = (start.1 - center.1).atan2(start.0 - center.0);
        for j in 0..=8 {
            let ang = a0 + turn * j as f64 / 8.0;
            pts.push((center.0 + r * ang.cos(), center.1 + r * ang.sin()));
        }
    }
    pts.push(corners[corners.len() - 1]);
    resample(&pts, n)
}

/// Translate the bounding-box corner to the origin and scale its longest side to 1.
fn unit_extent(points: &mut [Point]) {
    let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points.iter() {
        lo_x = lo_x.min(p.0);
        lo_y = lo_y.min(p.1);
        hi_x = hi_x.max(p.0);
        hi_y = hi_y.max(p.1);
    }
    let scale = (hi_x - lo_x).max(hi_y - lo_y);
    for p in points.iter_mut() {
        *p = ((p.0 - lo_x) / scale, (p.1 - lo_y) / scale);
    }
}

/// Noise-free shape with unit extent, starting at the origin, densely
/// sampled at constant spacing. Executed movements follow this path.
pub fn canonical_path(class: ShapeClass) -> Vec<Point> {
    let mut pts = resample(&dense_path(class, &ShapeParams::canonical()), DENSE_POINTS);
    unit_extent(&mut pts);
    let (x0, y0) = pts[0];
    for p in pts.iter_mut() {
        *p = (p.0 - x0, p.1 - y0);
    }
    pts
}

/// A synthetic stroke of `n_samples` samples at [`SAMPLE_PERIOD`] spacing
/// with unit extent, before dropout.
pub fn generate_shape(class: ShapeClass, noise: &NoiseProfile, n_samples: usize) -> Trajectory {
    assert!(n_samples >= 16, "generate_shape needs at least 16 samples");
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let sloppy = noise.jitter_sigma > 0.0 || noise.drop_rate > 0.0;
    let params = ShapeParams::random(&mut rng, sloppy);
    let rotation = rng.random_range(0.0..TAU);
    let mirror = rng.random_bool(0.5);

    let mut pts = warp_speed(&dense_path(class, &params), n_samples, &params);
    let (c, s) = (rotation.cos(), rotation.sin());
    for p in pts.iter_mut() {
        let y = if mirror { -p.1 } else { p.1 };
        *p = (p.0 * c - y * s, p.0 * s + y * c);
    }
    unit_extent(&mut pts);

    let wobble_x = smooth_noise(&mut rng, n_samples);
    let wobble_y = smooth_noise(&mut rng, n_samples);
    let last = n_samples - 1;
    let mut samples = Vec::with_capacity(n_samples);
    for (i, (x, y)) in pts.into_iter().enumerate() {
        // always draw, so dropout does not shift the random stream
        let dropped = noise.drop_rate > 0.0 && rng.random_bool(noise.drop_rate);
        if dropped && i != 0 && i != last {
            continue;
        }
        samples.push(TimedPoint {
            t: i as f64 * SAMPLE_PERIOD,
            x: x + noise.jitter_sigma * wobble_x[i],
            y: y + noise.jitter_sigma * wobble_y[i],
        });
    }
    Trajectory::from_points(samples).expect("generated timestamps increase")
}

/// Unit-variance noise correlated over a few samples: white Gaussian noise
/// convolved with a Gaussian kernel and rescaled.
fn smooth_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let reach = (3.0 * WOBBLE_SAMPLES).ceil() as usize;
    let white: Vec<f64> = (0..n + 2 * reach).map(|_| normal.sample(rng)).collect();
    let kernel: Vec<f64> = (0..=2 * reach)
        .map(|j| {
            let d = j as f64 - reach as f64;
            (-0.5 * d * d / (WOBBLE_SAMPLES * WOBBLE_SAMPLES)).exp()
        })
        .collect();
    let norm = kernel.iter().map(|w| w * w).sum::<f64>().sqrt();
    (0..n)
        .map(|i| kernel.iter().zip(&white[i..]).map(|(w, v)| w * v).sum::<f64>() / norm)
        .collect()
}

/// Seed for the `index`-th example of `class` in a corpus drawn from `base`.
pub fn example_seed(base: u64, class: ShapeClass, index: usize) -> u64 {
    // splitmix64 finalizer over a packed key
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((class.index() as u64) << 40)
        .wrapping_add(index as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `per_class` strokes of every class, class-major order.
pub fn generate_corpus(
    per_class: usize,
    noise: &NoiseProfile,
    n_samples: usize,
) -> Vec<(Trajectory, ShapeClass)> {
    let mut out = Vec::with_capacity(per_class * ShapeClass::ALL.len());
    for class in ShapeClass::ALL {
        for i in 0..per_class {
            let profile = noise.with_seed(example_seed(noise.seed, class, i));
            out.push((generate_shape(class, &profile, n_samples), class));
        }
    }
    out
}

/// Scale a unit-extent stroke to `size` meters.
pub fn scaled(traj: &Trajectory, size: f64) -> Trajectory {
    let pts = traj
        .points()
        .iter()
        .map(|p| TimedPoint { t: p.t, x: p.x * size, y: p.y * size })
        .collect();
    Trajectory::from_points(pts).expect("timestamps unchanged")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::features_of;

    #[test]
    fn parse_names() {
        for c in ShapeClass::ALL {
            assert_eq!(c.name().parse::<ShapeClass>().unwrap(), c);
            assert_eq!(ShapeClass::from_index(c.index()), Some(c));
        }
        assert!("triangle".parse::<ShapeClass>().is_err());
        assert_eq!(ShapeClass::ALL.len(), 6);
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseProfile::new(-0.1, 0.0, 1).is_err());
        assert!(NoiseProfile::new(0.1, 0.6, 1).is_err());
        assert_eq!(NoiseProfile::preset("robot", 3).unwrap(), NoiseProfile::robot(3));
        assert_eq!(NoiseProfile::preset("0.03", 3).unwrap().jitter_sigma, 0.03);
        assert!(NoiseProfile::preset("loud", 3).is_err());
    }

    #[test]
    fn clean_circle_is_closed() {
        let t = generate_shape(ShapeClass::Circle, &NoiseProfile::clean(5), 64);
        assert_eq!(t.len(), 64);
        assert!(features_of(&t).unwrap().closure < 0.05);
    }

    #[test]
    fn lines_barely_turn() {
        let clean = generate_shape(ShapeClass::Line, &NoiseProfile::clean(1), 32);
        assert!(features_of(&clean).unwrap().winding_abs < 1e-9);
        // 32 samples at mouse noise: median over seeds, computed on generator output
        let mut f6: Vec<f64> = (0..200)
            .map(|seed| {
                let t = generate_shape(ShapeClass::Line, &NoiseProfile::mouse(seed), 32);
                features_of(&t).unwrap().winding_abs
            })
            .collect();
        f6.sort_by(f64::total_cmp);
        assert!(f6[100] < 0.2, "median {}", f6[100]);
        let circle = generate_shape(ShapeClass::Circle, &NoiseProfile::mouse(0), 32);
        assert!(features_of(&circle).unwrap().winding_abs > 0.9);
    }

    #[test]
    fn deterministic_per_seed() {
        for c in ShapeClass::ALL {
            let a = generate_shape(c, &NoiseProfile::robot(77), 60);
            let b = generate_shape(c, &NoiseProfile::robot(77), 60);
            let bits = |t: &Trajectory| {
                t.points().iter().map(|p| (p.t.to_bits(), p.x.to_bits(), p.y.to_bits())).collect::<Vec<_>>()
            };
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn dropout_keeps_endpoints() {
        let t = generate_shape(ShapeClass::Spike, &NoiseProfile::new(0.0, 0.5, 9).unwrap(), 40);
        assert!(t.len() < 40);
        assert_eq!(t.points()[0].t, 0.0);
        assert_eq!(t.points().last().unwrap().t, 39.0 * SAMPLE_PERIOD);
    }

    #[test]
    fn canonical_paths_have_unit_extent() {
        for c in ShapeClass::ALL {
            let p = canonical_path(c);
            assert_eq!(p[0], (0.0, 0.0));
            let w = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max)
                - p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
            let h = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max)
                - p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
            assert!((w.max(h) - 1.0).abs() < 1e-12, "{c}");
        }
        let line = canonical_path(ShapeClass::Line);
        assert!((crate::trajectory::path_length(&line) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_layout() {
        let corpus = generate_corpus(3, &NoiseProfile::training(42), 60);
        assert_eq!(corpus.len(), 18);
        assert_eq!(corpus[0].1, ShapeClass::Circle);
        assert_eq!(corpus[17].1, ShapeClass::Line);
        assert_ne!(corpus[0].0, corpus[1].0);
    }
}
