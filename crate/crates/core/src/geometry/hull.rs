//! Andrew's monotone chain convex hull.
//!
//! Points are sorted lexicographically by (x, y); the lower and upper chains
//! are built with a strict left-turn test, so collinear boundary points are
//! dropped and the result has no three consecutive collinear vertices.

use thiserror::Error;

pub type Point = (f64, f64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HullError {
    #[error("convex hull needs at least 2 distinct points, got {0}")]
    TooFewPoints(usize),
}

/// z-component of (a - o) x (b - o); positive for a counter-clockwise turn.
#[inline]
pub fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex polygon in counter-clockwise order. A collinear input yields the
/// two extreme endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPolygon {
    vertices: Vec<Point>,
}

impl HullPolygon {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        0.5 * self.edges().map(|(a, b)| a.0 * b.1 - b.0 * a.1).sum::<f64>()
    }

    /// Closed-boundary length; a 2-vertex hull is traversed there and back.
    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b.0 - a.0).hypot(b.1 - a.1)).sum()
    }

    /// `(width, height)` of the minimum-area enclosing rectangle, with
    /// `width >= height`. One side of that rectangle is collinear with a hull
    /// edge, so trying every edge direction is exact.
    pub fn min_area_rect(&self) -> (f64, f64) {
        if self.vertices.len() == 2 {
            let (a, b) = (self.vertices[0], self.vertices[1]);
            return ((b.0 - a.0).hypot(b.1 - a.1), 0.0);
        }
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for (a, b) in self.edges() {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if len == 0.0 {
                continue;
            }
            let (ux, uy) = ((b.0 - a.0) / len, (b.1 - a.1) / len);
            let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in &self.vertices {
                let u = p.0 * ux + p.1 * uy;
                let v = -p.0 * uy + p.1 * ux;
                lo_u = lo_u.min(u);
                hi_u = hi_u.max(u);
                lo_v = lo_v.min(v);
                hi_v = hi_v.max(v);
            }
            let (w, h) = (hi_u - lo_u, hi_v - lo_v);
            if w * h < best.0 {
                best = (w * h, w.max(h), w.min(h));
            }
        }
        (best.1, best.2)
    }

    /// True when `p` is inside or on the hull, with slack `eps` on each edge.
    pub fn contains(&self, p: Point, eps: f64) -> bool {
        if self.is_degenerate() {
            let (a, b) = (self.vertices[0], self.vertices[1]);
            return cross(a, b, p).abs() <= eps;
        }
        self.edges().all(|(a, b)| cross(a, b, p) >= -eps)
    }
}

pub fn convex_hull(points: &[Point]) -> Result<HullPolygon, HullError> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 2 {
        return Err(HullError::TooFewPoints(pts.len()));
    }

    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    // last point repeats the first
    hull.pop();
    Ok(HullPolygon { vertices: hull })
}
