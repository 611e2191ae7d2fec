//! Timestamped 2-D motion samples, fixed-duration segmentation and
//! translation/scale normalization.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("non-monotonic timestamp: {next} does not follow {last}")]
    NonMonotonicTimestamp { last: f64, next: f64 },
    #[error("invalid sample: t={t} x={x} y={y}")]
    InvalidSample { t: f64, x: f64, y: f64 },
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(&'static str),
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One optical-sensor sample: session time in seconds, position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl TimedPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Result<Self, TrajectoryError> {
        if !(t.is_finite() && t >= 0.0 && x.is_finite() && y.is_finite()) {
            return Err(TrajectoryError::InvalidSample { t, x, y });
        }
        Ok(Self { t, x, y })
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Ordered samples with strictly increasing timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    points: Vec<TimedPoint>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<TimedPoint>) -> Result<Self, TrajectoryError> {
        let mut traj = Trajectory {
            points: Vec::with_capacity(points.len()),
        };
        for p in points {
            traj.push(p)?;
        }
        Ok(traj)
    }

    /// Value-semantics append: `self` is left untouched.
    pub fn append_sample(&self, p: TimedPoint) -> Result<Trajectory, TrajectoryError> {
        let mut out = self.clone();
        out.push(p)?;
        Ok(out)
    }

    /// In-place append with the same validation as [`Trajectory::append_sample`].
    pub fn push(&mut self, p: TimedPoint) -> Result<(), TrajectoryError> {
        TimedPoint::new(p.t, p.x, p.y)?;
        if let Some(last) = self.points.last() {
            if p.t <= last.t {
                return Err(TrajectoryError::NonMonotonicTimestamp {
                    last: last.t,
                    next: p.t,
                });
            }
        }
        self.points.push(p);
        Ok(())
    }

    pub fn points(&self) -> &[TimedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(TimedPoint::xy).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn path_length(&self) -> f64 {
        path_length(&self.xy())
    }

    /// Parse the `t x y` line format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TrajectoryError> {
        let mut traj = Trajectory::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| TrajectoryError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
            }
            let mut vals = [0.0; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f64::from_str(f).map_err(|e| parse_err(format!("{f:?}: {e}")))?;
            }
            let p = TimedPoint::new(vals[0], vals[1], vals[2]).map_err(|e| parse_err(e.to_string()))?;
            traj.push(p).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(traj)
    }

    /// Render in the `t x y` line format using shortest round-trip floats.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let _ = writeln!(out, "{} {} {}", p.t, p.x, p.y);
        }
        out
    }
}

pub fn path_length(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    /// Window length in seconds.
    pub window: f64,
    pub min_points: usize,
    /// Minimum path length in meters for a window to count as movement.
    pub min_path_length: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            window: 3.0,
            min_points: 8,
            min_path_length: 0.02,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(TrajectoryError::InvalidConfig("window must be > 0"));
        }
        if self.min_points < 3 {
            return Err(TrajectoryError::InvalidConfig("min_points must be >= 3"));
        }
        if !(self.min_path_length.is_finite() && self.min_path_length > 0.0) {
            return Err(TrajectoryError::InvalidConfig("min_path_length must be > 0"));
        }
        Ok(())
    }

    /// True when a window with these samples carries no usable movement.
    pub fn is_idle(&self, traj: &Trajectory) -> bool {
        traj.len() < self.min_points || traj.path_length() < self.min_path_length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub trajectory: Trajectory,
    pub idle: bool,
}

/// Split into consecutive windows of `cfg.window` seconds measured from the
/// first sample. Windows without samples produce no segment.
pub fn segment_all(traj: &Trajectory, cfg: &SegmentationConfig) -> Vec<Segment> {
    let Some(first) = traj.points.first() else {
        return Vec::new();
    };
    let t0 = first.t;
    let mut out = Vec::new();
    let mut current: Vec<TimedPoint> = Vec::new();
    let mut current_idx = 0u64;
    for p in &traj.points {
        let idx = ((p.t - t0) / cfg.window).floor() as u64;
        if idx != current_idx && !current.is_empty() {
            out.push(close_segment(std::mem::take(&mut current), cfg));
        }
        current_idx = idx;
        current.push(*p);
    }
    if !current.is_empty() {
        out.push(close_segment(current, cfg));
    }
    out
}

fn close_segment(points: Vec<TimedPoint>, cfg: &SegmentationConfig) -> Segment {
    let trajectory = Trajectory { points };
    let idle = cfg.is_idle(&trajectory);
    Segment { trajectory, idle }
}

/// The kept (non-idle) windows of [`segment_all`].
pub fn segment(traj: &Trajectory, cfg: &SegmentationConfig) -> Vec<Trajectory> {
    segment_all(traj, cfg)
        .into_iter()
        .filter(|s| !s.idle)
        .map(|s| s.trajectory)
        .collect()
}

/// Translate the centroid to the origin and scale the bounding-box diagonal to 1.
pub fn normalize(traj: &Trajectory) -> Result<Trajectory, TrajectoryError> {
    if traj.len() < 2 {
        return Err(TrajectoryError::DegenerateTrajectory("fewer than 2 points"));
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in &traj.points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
        sx += p.x;
        sy += p.y;
    }
    let diag = (max_x - min_x).hypot(max_y - min_y);
    if !(diag > 0.0) || !diag.is_finite() {
        return Err(TrajectoryError::DegenerateTrajectory("zero bounding-box diagonal"));
    }
    let n = traj.len() as f64;
    let (cx, cy) = (sx / n, sy / n);
    let points = traj
        .points
        .iter()
        .map(|p| TimedPoint {
            t: p.t,
            x: (p.x - cx) / diag,
            y: (p.y - cy) / diag,
        })
        .collect();
    Ok(Trajectory { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(t: f64, x: f64, y: f64) -> TimedPoint {
        TimedPoint::new(t, x, y).unwrap()
    }

    fn stream(seconds: f64, hz: f64, f: impl Fn(f64) -> (f64, f64)) -> Trajectory {
        let n = (seconds * hz).round() as usize;
        let pts = (0..n)
            .map(|i| {
                let t = i as f64 / hz;
                let (x, y) = f(t);
                pt(t, x, y)
            })
            .collect();
        Trajectory::from_points(pts).unwrap()
    }

    #[test]
    fn append_to_empty() {
        let t = Trajectory::new();
        let t1 = t.append_sample(pt(0.0, 0.0, 0.0)).unwrap();
        assert_eq!(t1.len(), 1);
        assert!(t.is_empty());
    }

    #[test]
    fn append_rejects_non_monotonic() {
        let t = Trajectory::new().append_sample(pt(0.0, 0.0, 0.0)).unwrap();
        let err = t
            .append_sample(TimedPoint { t: -1.0, x: 0.0, y: 0.0 })
            .unwrap_err();
        assert!(matches!(err, TrajectoryError::InvalidSample { .. }));
        let err = t.append_sample(pt(0.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, TrajectoryError::NonMonotonicTimestamp { .. }));
    }

    #[test]
    fn append_64_circle_samples() {
        let mut t = Trajectory::new();
        for i in 0..64 {
            let a = i as f64 / 64.0 * std::f64::consts::TAU;
            t = t.append_sample(pt(i as f64 * 0.05, a.cos(), a.sin())).unwrap();
        }
        assert_eq!(t.len(), 64);
        assert!(t.points().windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn nine_seconds_make_three_windows() {
        let traj = stream(9.0, 20.0, |t| (t * 0.1, (t * 2.0).sin() * 0.1));
        let segs = segment(&traj, &SegmentationConfig::default());
        assert_eq!(segs.len(), 3);
        for s in &segs {
            assert!((58..=62).contains(&s.len()), "{}", s.len());
        }
    }

    #[test]
    fn empty_and_stationary_streams_give_nothing() {
        let cfg = SegmentationConfig::default();
        assert!(segment(&Trajectory::new(), &cfg).is_empty());
        let still = stream(3.0, 20.0, |_| (0.4, 0.4));
        assert!(segment(&still, &cfg).is_empty());
        let all = segment_all(&still, &cfg);
        assert_eq!(all.len(), 1);
        assert!(all[0].idle);
    }

    #[test]
    fn config_validation() {
        assert!(SegmentationConfig::default().validate().is_ok());
        let bad = SegmentationConfig { min_points: 2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SegmentationConfig { window: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn normalize_square() {
        let traj = Trajectory::from_points(vec![
            pt(0.0, 10.0, 10.0),
            pt(1.0, 11.0, 10.0),
            pt(2.0, 11.0, 11.0),
            pt(3.0, 10.0, 11.0),
        ])
        .unwrap();
        let n = normalize(&traj).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expect = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
        for (p, e) in n.points().iter().zip(expect) {
            assert!((p.x - e.0 * s).abs() < 1e-12 && (p.y - e.1 * s).abs() < 1e-12);
        }
        assert_eq!(n.points()[2].t, 2.0);
    }

    #[test]
    fn normalize_degenerate() {
        let one = Trajectory::from_points(vec![pt(0.0, 1.0, 1.0)]).unwrap();
        assert!(matches!(
            normalize(&one),
            Err(TrajectoryError::DegenerateTrajectory(_))
        ));
        let same = Trajectory::from_points(vec![pt(0.0, 1.0, 1.0), pt(1.0, 1.0, 1.0)]).unwrap();
        assert!(normalize(&same).is_err());
    }

    #[test]
    fn parse_and_render() {
        let text = "# header\n0 0 0\n0.05 0.1 -0.2\n\n0.1 0.2 0.3\n";
        let t = Trajectory::parse(text).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(Trajectory::parse(&t.to_text()).unwrap(), t);
        assert!(Trajectory::parse("0 0\n").is_err());
        assert!(matches!(
            Trajectory::parse("0 0 0\n0 1 1\n"),
            Err(TrajectoryError::Parse { line: 2, .. })
        ));
    }

    fn arb_traj() -> impl Strategy<Value = Trajectory> {
        prop::collection::vec((0.001f64..0.2, -5.0f64..5.0, -5.0f64..5.0), 2..60).prop_map(|v| {
            let mut t = 0.0;
            let pts = v
                .into_iter()
                .map(|(dt, x, y)| {
                    t += dt;
                    pt(t, x, y)
                })
                .collect();
            Trajectory::from_points(pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn normalize_idempotent_and_similarity_invariant(
            traj in arb_traj(),
            dx in -50.0f64..50.0, dy in -50.0f64..50.0, s in 0.01f64..100.0,
        ) {
            prop_assume!(normalize(&traj).is_ok());
            let n1 = normalize(&traj).unwrap();
            let n2 = normalize(&n1).unwrap();
            let moved = Trajectory::from_points(
                traj.points().iter().map(|p| pt(p.t, p.x * s + dx, p.y * s + dy)).collect(),
            ).unwrap();
            let n3 = normalize(&moved).unwrap();
            for ((a, b), c) in n1.points().iter().zip(n2.points()).zip(n3.points()) {
                prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
                prop_assert!((a.x - c.x).abs() < 1e-9 && (a.y - c.y).abs() < 1e-9);
                prop_assert_eq!(a.t, b.t);
            }
        }

        #[test]
        fn segmentation_partitions_input(traj in arb_traj(), window in 0.1f64..2.0) {
            let cfg = SegmentationConfig { window, ..Default::default() };
            let segs = segment_all(&traj, &cfg);
            let joined: Vec<TimedPoint> =
                segs.iter().flat_map(|s| s.trajectory.points().to_vec()).collect();
            prop_assert_eq!(joined.as_slice(), traj.points());
            for s in segs.iter().filter(|s| !s.idle) {
                prop_assert!(s.trajectory.duration() <= window + 0.2);
            }
        }
    }
}
