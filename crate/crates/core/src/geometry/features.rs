//! Fixed-length shape descriptor built from the convex hull of a segment and
//! the turning profile of its arc-length resampled path.
//!
//! | idx | name              | definition                                         |
//! |-----|-------------------|----------------------------------------------------|
//! | f1  | hull_vertex_count | number of hull vertices                            |
//! | f2  | extent            | hull area / minimum-area enclosing rectangle area  |
//! | f3  | overlap           | hull perimeter / path length                       |
//! | f4  | closure           | distance(first, last) / path length                |
//! | f5  | aspect            | short / long side of that rectangle                |
//! | f6  | winding_abs       | total absolute turning / 2π                        |
//! | f7  | winding_net       | abs(net signed turning) / 2π                       |
//! | f8  | corner_count      | direction changes sharper than 80°                 |
//!
//! The bounding rectangle is the minimum-area one (one side flush with a hull
//! edge) rather than the axis-aligned box, which keeps f2..f8 independent of
//! how the stroke is rotated.

use std::f64::consts::{PI, TAU};
use std::fmt;

use super::hull::{convex_hull, HullError, Point};
use crate::trajectory::{path_length, Trajectory, TrajectoryError};

pub const FEATURE_COUNT: usize = 8;

/// Number of equidistant points the path is resampled to before measuring turns.
pub const RESAMPLE_POINTS: usize = 32;

/// Turns sharper than this (degrees) count as corners.
pub const CORNER_DEGREES: f64 = 80.0;

/// Per-point turns below this (degrees) never belong to a corner. A corner
/// that falls between two resampled points shows up as two consecutive
/// turns of the same sign; those are merged before comparing with
/// [`CORNER_DEGREES`].
const CORNER_PART_DEGREES: f64 = 10.0;

/// Longest run of merged turns still counted as a single corner. Longer runs
/// are smooth bends, not corners.
const CORNER_MAX_RUN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub hull_vertex_count: f64,
    pub extent: f64,
    pub overlap: f64,
    pub closure: f64,
    pub aspect: f64,
    pub winding_abs: f64,
    pub winding_net: f64,
    pub corner_count: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.hull_vertex_count,
            self.extent,
            self.overlap,
            self.closure,
            self.aspect,
            self.winding_abs,
            self.winding_net,
            self.corner_count,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        Self {
            hull_vertex_count: a[0],
            extent: a[1],
            overlap: a[2],
            closure: a[3],
            aspect: a[4],
            winding_abs: a[5],
            winding_net: a[6],
            corner_count: a[7],
        }
    }
}

impl fmt::Display for FeatureVector {
    /// Space separated, shortest round-trip representation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.to_array().iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl From<HullError> for TrajectoryError {
    fn from(_: HullError) -> Self {
        TrajectoryError::DegenerateTrajectory("fewer than 2 distinct points")
    }
}

/// Features of an already normalized segment.
pub fn extract_features(seg: &Trajectory) -> Result<FeatureVector, TrajectoryError> {
    if seg.len() < 3 {
        return Err(TrajectoryError::DegenerateTrajectory("fewer than 3 points"));
    }
    let pts = seg.xy();
    let length = path_length(&pts);
    if !(length > 0.0) || !length.is_finite() {
        return Err(TrajectoryError::DegenerateTrajectory("zero path length"));
    }

    let hull = convex_hull(&pts)?;
    let (long_side, short_side) = hull.min_area_rect();
    let rect_area = long_side * short_side;
    let extent = if hull.is_degenerate() || rect_area <= 0.0 {
        0.0
    } else {
        (hull.area() / rect_area).clamp(0.0, 1.0)
    };
    let aspect = if long_side > 0.0 {
        (short_side / long_side).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let closure = ((last.0 - first.0).hypot(last.1 - first.1) / length).clamp(0.0, 1.0);

    let turns = turning_angles(&resample(&pts, RESAMPLE_POINTS));
    let winding_abs = turns.iter().map(|a| a.abs()).sum::<f64>() / TAU;
    let winding_net = turns.iter().sum::<f64>().abs() / TAU;

    Ok(FeatureVector {
        hull_vertex_count: hull.len() as f64,
        extent,
        overlap: hull.perimeter() / length,
        closure,
        aspect,
        winding_abs,
        winding_net,
        corner_count: count_corners(&turns) as f64,
    })
}

/// Normalize a raw segment, then extract its features.
pub fn features_of(raw: &Trajectory) -> Result<FeatureVector, TrajectoryError> {
    extract_features(&crate::trajectory::normalize(raw)?)
}

/// `n` points spaced equally along the polyline, first and last included.
pub fn resample(points: &[Point], n: usize) -> Vec<Point> {
    debug_assert!(n >= 2);
    let total = path_length(points);
    if points.len() < 2 || total == 0.0 {
        return vec![points.first().copied().unwrap_or((0.0, 0.0)); n];
    }
    let step = total / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    out.push(points[0]);
    let mut seg = 0usize;
    let mut seg_start = 0.0;
    for k in 1..n - 1 {
        let target = step * k as f64;
        loop {
            let (a, b) = (points[seg], points[seg + 1]);
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if seg_start + len >= target || seg + 2 >= points.len() {
                let r = if len > 0.0 {
                    ((target - seg_start) / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                out.push((a.0 + r * (b.0 - a.0), a.1 + r * (b.1 - a.1)));
                break;
            }
            seg_start += len;
            seg += 1;
        }
    }
    out.push(points[points.len() - 1]);
    out
}

/// Signed turn at each interior vertex, in (-π, π]. Zero-length steps give 0.
pub fn turning_angles(points: &[Point]) -> Vec<f64> {
    points
        .windows(3)
        .map(|w| {
            let (ax, ay) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let (bx, by) = (w[2].0 - w[1].0, w[2].1 - w[1].1);
            if (ax == 0.0 && ay == 0.0) || (bx == 0.0 && by == 0.0) {
                0.0
            } else {
                (ax * by - ay * bx).atan2(ax * bx + ay * by)
            }
        })
        .collect()
}

/// Runs of consecutive same-sign turns above the part threshold are merged;
/// a short run whose total exceeds [`CORNER_DEGREES`] is one corner.
pub fn count_corners(turns: &[f64]) -> usize {
    let part = CORNER_PART_DEGREES * PI / 180.0;
    let corner = CORNER_DEGREES * PI / 180.0;
    let mut count = 0;
    let mut run_sum = 0.0f64;
    let mut run_len = 0usize;
    let mut flush = |sum: f64, len: usize| {
        if len > 0 && len <= CORNER_MAX_RUN && sum.abs() > corner {
            count += 1;
        }
    };
    for &a in turns {
        if a.abs() > part && (run_len == 0 || a.signum() == run_sum.signum()) {
            run_sum += a;
            run_len += 1;
        } else {
            flush(run_sum, run_len);
            if a.abs() > part {
                run_sum = a;
                run_len = 1;
            } else {
                run_sum = 0.0;
                run_len = 0;
            }
        }
    }
    flush(run_sum, run_len);
    count
}
