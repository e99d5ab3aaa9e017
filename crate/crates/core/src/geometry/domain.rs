//! Bounded domains with electrode arcs on the boundary.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::polygon::{self, Point};
use crate::{Error, Result};

/// An electrode as an arclength interval `[start_s, end_s]` on the boundary.
///
/// `start_s` lies in `[0, P)`; `end_s > start_s` and may exceed `P`, in which
/// case the arc wraps through the first boundary vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeArc {
    pub start_s: f64,
    pub end_s: f64,
}

impl ElectrodeArc {
    pub fn length(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// True when arclength `s` (any real) lies strictly inside the arc.
    pub fn contains(&self, s: f64, perimeter: f64) -> bool {
        let t = (s - self.start_s).rem_euclid(perimeter);
        t > 0.0 && t < self.length()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainRaw {
    boundary: Vec<Point>,
    electrodes: Vec<ElectrodeArc>,
}

/// A simply connected domain given by its counter-clockwise boundary polyline
/// and non-overlapping electrode arcs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "DomainRaw")]
pub struct Domain2D {
    boundary: Vec<Point>,
    electrodes: Vec<ElectrodeArc>,
    #[serde(skip)]
    cum: Vec<f64>,
}

impl TryFrom<DomainRaw> for Domain2D {
    type Error = Error;
    fn try_from(r: DomainRaw) -> Result<Self> {
        Domain2D::new(r.boundary, r.electrodes)
    }
}

impl Domain2D {
    /// Validates and builds a domain.
    pub fn new(boundary: Vec<Point>, electrodes: Vec<ElectrodeArc>) -> Result<Self> {
        if boundary.len() < 3 {
            return Err(Error::Geometry("boundary needs at least 3 vertices".into()));
        }
        if boundary.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::Geometry("non-finite boundary vertex".into()));
        }
        if !polygon::is_simple(&boundary) {
            return Err(Error::Geometry("boundary is not a simple polygon".into()));
        }
        if polygon::signed_area(&boundary) <= 0.0 {
            return Err(Error::Geometry("boundary must be counter-clockwise".into()));
        }
        let mut cum = Vec::with_capacity(boundary.len() + 1);
        cum.push(0.0);
        let n = boundary.len();
        for i in 0..n {
            let l = cum[i] + boundary[i].dist(boundary[(i + 1) % n]);
            cum.push(l);
        }
        let d = Self { boundary, electrodes, cum };
        d.check_electrodes()?;
        Ok(d)
    }

    fn check_electrodes(&self) -> Result<()> {
        let p = self.perimeter();
        for (l, e) in self.electrodes.iter().enumerate() {
            if !(e.start_s.is_finite() && e.end_s.is_finite()) {
                return Err(Error::Geometry(format!("electrode {l} has non-finite ends")));
            }
            if e.start_s < 0.0 || e.start_s >= p {
                return Err(Error::Geometry(format!("electrode {l} starts outside [0, P)")));
            }
            if e.length() <= 0.0 || e.length() >= p {
                return Err(Error::Geometry(format!("electrode {l} has invalid length")));
            }
        }
        let mut order: Vec<usize> = (0..self.electrodes.len()).collect();
        order.sort_by(|&a, &b| self.electrodes[a].start_s.total_cmp(&self.electrodes[b].start_s));
        let m = order.len();
        if m > 1 {
            for k in 0..m {
                let cur = self.electrodes[order[k]];
                let next = self.electrodes[order[(k + 1) % m]];
                let next_start = if k + 1 == m { next.start_s + p } else { next.start_s };
                if cur.end_s >= next_start {
                    return Err(Error::Geometry(format!("electrodes {} and {} overlap", order[k], order[(k + 1) % m])));
                }
            }
        }
        Ok(())
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn electrodes(&self) -> &[ElectrodeArc] {
        &self.electrodes
    }

    pub fn n_electrodes(&self) -> usize {
        self.electrodes.len()
    }

    pub fn perimeter(&self) -> f64 {
        self.cum[self.boundary.len()]
    }

    pub fn area(&self) -> f64 {
        polygon::signed_area(&self.boundary)
    }

    /// Arclength of boundary vertex `i`; entry `n` equals the perimeter.
    pub fn vertex_arclength(&self) -> &[f64] {
        &self.cum
    }

    pub fn electrode_lengths(&self) -> Vec<f64> {
        self.electrodes.iter().map(|e| e.length()).collect()
    }

    /// Lower-left and upper-right corners of the bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.boundary {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Point) -> bool {
        polygon::contains(&self.boundary, p)
    }

    /// Segment index and local parameter of arclength `s` (taken modulo P).
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let p = self.perimeter();
        let s = s.rem_euclid(p);
        let n = self.boundary.len();
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => (i - 1).min(n - 1),
        };
        let len = self.cum[i + 1] - self.cum[i];
        (i, ((s - self.cum[i]) / len).clamp(0.0, 1.0))
    }

    /// Boundary point at arclength `s` (taken modulo P).
    pub fn point_at(&self, s: f64) -> Point {
        let (i, t) = self.locate(s);
        let n = self.boundary.len();
        self.boundary[i].lerp(self.boundary[(i + 1) % n], t)
    }

    /// Arclength of a point known to lie on boundary segment `i`.
    pub fn arclength_on_segment(&self, i: usize, p: Point) -> f64 {
        let n = self.boundary.len();
        let a = self.boundary[i];
        let b = self.boundary[(i + 1) % n];
        let t = ((p - a).dot(b - a) / (b - a).dot(b - a)).clamp(0.0, 1.0);
        self.cum[i] + t * (self.cum[i + 1] - self.cum[i])
    }

    /// Points along the boundary from arclength `s0` to `s1 >= s0`, including
    /// both ends and every vertex strictly between them.
    pub fn arc_points(&self, s0: f64, s1: f64) -> Vec<Point> {
        let p = self.perimeter();
        let n = self.boundary.len();
        let mut out = vec![self.point_at(s0)];
        let base = s0.div_euclid(p) * p;
        let mut k = 0usize;
        // Walk vertex arclengths over as many laps as needed.
        loop {
            let lap = (k / n) as f64;
            let s = base + lap * p + self.cum[k % n];
            if s >= s1 {
                break;
            }
            if s > s0 {
                out.push(self.boundary[k % n]);
            }
            k += 1;
        }
        out.push(self.point_at(s1));
        out
    }

    /// Electrode containing arclength `s` in its interior, if any.
    pub fn electrode_at(&self, s: f64) -> Option<usize> {
        let p = self.perimeter();
        self.electrodes.iter().position(|e| e.contains(s, p))
    }

    /// Same domain with a different electrode set.
    pub fn with_electrodes(&self, electrodes: Vec<ElectrodeArc>) -> Result<Self> {
        let d = Self { boundary: self.boundary.clone(), electrodes, cum: self.cum.clone() };
        d.check_electrodes()?;
        Ok(d)
    }
}

/// Arc centered at arclength `center` with length `len`, normalized so that
/// the start lies in `[0, P)`.
fn centered_arc(center: f64, len: f64, perimeter: f64) -> ElectrodeArc {
    let start = (center - 0.5 * len).rem_euclid(perimeter);
    ElectrodeArc { start_s: start, end_s: start + len }
}

/// Electrodes of equal length with centers equispaced in arclength, the first
/// centered at arclength zero.
pub fn equispaced_electrodes(perimeter: f64, count: usize, length: f64) -> Vec<ElectrodeArc> {
    (0..count).map(|l| centered_arc(l as f64 * perimeter / count as f64, length, perimeter)).collect()
}

/// Circle sampled by `samples` vertices, with `n_electrodes` electrodes of
/// arclength `electrode_length` centered at angles `2πℓ/L`.
pub fn make_circle_domain(
    radius: f64,
    center: Point,
    n_electrodes: usize,
    electrode_length: f64,
    samples: usize,
) -> Result<Domain2D> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    if samples < 3 {
        return Err(Error::InvalidParameter("need at least 3 boundary samples".into()));
    }
    let boundary: Vec<Point> = (0..samples)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / samples as f64;
            Point::new(center.x + radius * t.cos(), center.y + radius * t.sin())
        })
        .collect();
    let perimeter = polygon::closed_length(&boundary);
    if n_electrodes as f64 * electrode_length >= perimeter {
        return Err(Error::InvalidParameter("electrodes do not fit on the circle".into()));
    }
    let electrodes = equispaced_electrodes(perimeter, n_electrodes, electrode_length);
    Domain2D::new(boundary, electrodes)
}

/// One term `a·cos(kφ) + b·sin(kφ)` of a radial Fourier profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: u32,
    pub a: f64,
    pub b: f64,
}

/// Smooth star-shaped chest-like outline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChestSpec {
    /// Target perimeter after scaling.
    pub perimeter: f64,
    /// Profile `r(φ) = 1 + Σ (a cos kφ + b sin kφ)`, before scaling.
    pub terms: Vec<FourierTerm>,
    pub samples: usize,
    pub n_electrodes: usize,
    pub electrode_length: f64,
}

impl Default for ChestSpec {
    fn default() -> Self {
        Self {
            perimeter: 102.33,
            terms: vec![FourierTerm { k: 2, a: 0.18, b: 0.0 }, FourierTerm { k: 3, a: -0.05, b: 0.0 }],
            samples: 1024,
            n_electrodes: 16,
            electrode_length: 2.0,
        }
    }
}

/// Chest-shaped phantom domain scaled to the requested perimeter, with
/// electrodes equispaced in arclength.
pub fn make_chest_phantom(spec: &ChestSpec) -> Result<Domain2D> {
    if spec.samples < 3 || !(spec.perimeter > 0.0) {
        return Err(Error::InvalidParameter("invalid chest phantom spec".into()));
    }
    let n = spec.samples;
    let raw: Vec<Point> = (0..n)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n as f64;
            let r = 1.0
                + spec
                    .terms
                    .iter()
                    .map(|t| t.a * (t.k as f64 * phi).cos() + t.b * (t.k as f64 * phi).sin())
                    .sum::<f64>();
            Point::new(r * phi.cos(), r * phi.sin())
        })
        .collect();
    if raw.iter().any(|p| p.norm() <= 0.0) {
        return Err(Error::InvalidParameter("radial profile is not positive".into()));
    }
    let scale = spec.perimeter / polygon::closed_length(&raw);
    let boundary: Vec<Point> = raw.into_iter().map(|p| p * scale).collect();
    let perimeter = polygon::closed_length(&boundary);
    if spec.n_electrodes as f64 * spec.electrode_length >= perimeter {
        return Err(Error::InvalidParameter("electrodes do not fit".into()));
    }
    let electrodes = equispaced_electrodes(perimeter, spec.n_electrodes, spec.electrode_length);
    Domain2D::new(boundary, electrodes)
}

/// Moves each electrode not listed in `fixed` along the boundary by
/// `sign·fraction·|e_l|`; lengths are kept.
///
/// `signs` holds one entry per electrode; only its sign matters.
pub fn displace_electrodes(domain: &Domain2D, fraction: f64, signs: &[f64], fixed: &[usize]) -> Result<Domain2D> {
    let l = domain.n_electrodes();
    if signs.len() != l {
        return Err(Error::InvalidParameter(format!("expected {l} displacement signs, got {}", signs.len())));
    }
    if !(fraction >= 0.0 && fraction.is_finite()) {
        return Err(Error::InvalidParameter("fraction must be non-negative".into()));
    }
    let p = domain.perimeter();
    let arcs = domain
        .electrodes()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if fixed.contains(&k) {
                *e
            } else {
                let shift = fraction * e.length() * signs[k].signum();
                let start = (e.start_s + shift).rem_euclid(p);
                ElectrodeArc { start_s: start, end_s: start + e.length() }
            }
        })
        .collect();
    domain.with_electrodes(arcs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_perimeter_matches_regular_polygon() {
        let d = make_circle_domain(1.0, Point::default(), 16, 0.1, 64).unwrap();
        let expect = 64.0 * 2.0 * (PI / 64.0).sin();
        assert!((d.perimeter() - expect).abs() < 1e-12);
        assert!(d.electrode_lengths().iter().all(|&l| (l - 0.1).abs() < 1e-15));
    }

    #[test]
    fn too_many_electrodes_rejected() {
        assert!(make_circle_domain(1.0, Point::default(), 16, 0.5, 256).is_err());
    }

    #[test]
    fn first_electrode_wraps_through_vertex_zero() {
        let d = make_circle_domain(1.0, Point::default(), 4, 0.2, 128).unwrap();
        let e = d.electrodes()[0];
        assert!(e.end_s > d.perimeter());
        let pts = d.arc_points(e.start_s, e.end_s);
        assert!(pts.contains(&Point::new(1.0, 0.0)));
        assert!((polygon::open_length(&pts) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn overlapping_electrodes_rejected() {
        let d = make_circle_domain(1.0, Point::default(), 2, 0.2, 64).unwrap();
        let arcs = vec![ElectrodeArc { start_s: 0.0, end_s: 0.5 }, ElectrodeArc { start_s: 0.4, end_s: 0.6 }];
        assert!(d.with_electrodes(arcs).is_err());
    }

    #[test]
    fn clockwise_boundary_rejected() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)];
        assert!(Domain2D::new(pts, vec![]).is_err());
    }

    #[test]
    fn chest_has_requested_perimeter() {
        let d = make_chest_phantom(&ChestSpec::default()).unwrap();
        assert!((d.perimeter() - 102.33).abs() < 1e-9);
        assert_eq!(d.n_electrodes(), 16);
    }

    #[test]
    fn displacement_keeps_fixed_electrodes() {
        let d = make_circle_domain(10.0, Point::default(), 16, 2.0, 512).unwrap();
        let signs = vec![1.0; 16];
        let moved = displace_electrodes(&d, 0.25, &signs, &[0, 1, 15]).unwrap();
        let step = 0.25 * 2.0;
        for k in 0..16 {
            let (a, b) = (d.electrodes()[k], moved.electrodes()[k]);
            let shift = (b.start_s - a.start_s).rem_euclid(d.perimeter());
            if [0, 1, 15].contains(&k) {
                assert_eq!(a, b);
            } else {
                assert!((shift - step).abs() < 1e-9);
            }
            assert!((b.length() - a.length()).abs() < 1e-12);
        }
    }

    #[test]
    fn large_displacement_overlap_rejected() {
        let d = make_circle_domain(1.0, Point::default(), 16, 0.3, 512).unwrap();
        let signs: Vec<f64> = (0..16).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(displace_electrodes(&d, 0.45, &signs, &[]).is_err());
    }

    #[test]
    fn domain_json_roundtrip() {
        let d = make_circle_domain(2.0, Point::new(1.0, 0.5), 8, 0.3, 96).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let e: Domain2D = serde_json::from_str(&s).unwrap();
        assert_eq!(d.boundary(), e.boundary());
        assert!((d.perimeter() - e.perimeter()).abs() == 0.0);
    }
}
