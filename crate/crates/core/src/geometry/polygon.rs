//! Points and closed polylines.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::{Error, Result};

/// A point in the plane. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// A polyline; when `closed` the last vertex connects back to the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl Polyline {
    pub fn closed(points: Vec<Point>) -> Self {
        Self { points, closed: true }
    }

    pub fn open(points: Vec<Point>) -> Self {
        Self { points, closed: false }
    }

    /// Perimeter of a closed polyline.
    pub fn perimeter(&self) -> Result<f64> {
        if !self.closed {
            return Err(Error::Geometry("perimeter of an open polyline".into()));
        }
        if self.points.len() < 3 {
            return Err(Error::Geometry("closed polyline needs at least 3 vertices".into()));
        }
        Ok(closed_length(&self.points))
    }

    /// Length along the polyline, including the closing edge when closed.
    pub fn length(&self) -> f64 {
        if self.closed {
            closed_length(&self.points)
        } else {
            open_length(&self.points)
        }
    }
}

/// Length of the closed polygon through `pts`.
pub fn closed_length(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].dist(pts[(i + 1) % n])).sum()
}

/// Length of the open path through `pts`.
pub fn open_length(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        a += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * a
}

/// Centroid of the polygon region.
pub fn centroid(pts: &[Point]) -> Point {
    let n = pts.len();
    let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let c = p.cross(q);
        a += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    Point::new(cx / (3.0 * a), cy / (3.0 * a))
}

/// Even-odd point-in-polygon test.
pub fn contains(pts: &[Point], p: Point) -> bool {
    let n = pts.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `ab`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let l2 = d.dot(d);
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / l2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Distance from `p` to the closed polygon boundary.
pub fn boundary_distance(pts: &[Point], p: Point) -> f64 {
    let n = pts.len();
    (0..n).map(|i| segment_distance(p, pts[i], pts[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when the closed polygon has no repeated vertices and no two
/// non-adjacent edges touch.
pub fn is_simple(pts: &[Point]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    if (0..n).any(|i| pts[i] == pts[(i + 1) % n]) {
        return false;
    }
    // Sort edges by their lower x so that only overlapping x-ranges are tested.
    let mut edges: Vec<(f64, f64, usize)> = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            (a.x.min(b.x), a.x.max(b.x), i)
        })
        .collect();
    edges.sort_by(|u, v| u.0.total_cmp(&v.0));
    for (k, &(_, xmax, i)) in edges.iter().enumerate() {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for &(xmin2, _, j) in &edges[k + 1..] {
            if xmin2 > xmax {
                break;
            }
            let adjacent = j == (i + 1) % n || i == (j + 1) % n;
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if adjacent {
                // Adjacent edges share one vertex; they must not fold back.
                let (shared, p, q) = if j == (i + 1) % n { (b, a, d) } else { (a, b, c) };
                if orient(shared, p, q) == 0.0 && (p - shared).dot(q - shared) > 0.0 {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)]
    }

    #[test]
    fn unit_square_perimeter_and_area() {
        let p = Polyline::closed(square());
        assert!((p.perimeter().unwrap() - 4.0).abs() < 1e-15);
        assert!((signed_area(&square()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn open_polyline_has_no_perimeter() {
        assert!(Polyline::open(square()).perimeter().is_err());
    }

    #[test]
    fn bowtie_is_not_simple() {
        let bow = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        assert!(!is_simple(&bow));
        assert!(is_simple(&square()));
    }

    #[test]
    fn containment_and_centroid() {
        let s = square();
        assert!(contains(&s, Point::new(0.5, 0.5)));
        assert!(!contains(&s, Point::new(1.5, 0.5)));
        let c = centroid(&s);
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_serializes_as_pair() {
        let s = serde_json::to_string(&Point::new(1.5, -2.0)).unwrap();
        assert_eq!(s, "[1.5,-2.0]");
    }
}
