//! Areas of the pieces of two overlapping regions.

use geo::{Area, BooleanOps, Coord, LineString, Polygon};
use serde::{Deserialize, Serialize};

use super::polygon::{self, Point};
use crate::{Error, Result};

/// Areas of `A \ B`, `B \ A` and `A ∩ B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapAreas {
    pub a_minus_b: f64,
    pub b_minus_a: f64,
    pub intersection: f64,
}

impl OverlapAreas {
    pub fn symmetric_difference(&self) -> f64 {
        self.a_minus_b + self.b_minus_a
    }
}

fn to_geo(pts: &[Point]) -> Polygon<f64> {
    let ring: Vec<Coord<f64>> = pts.iter().map(|p| Coord { x: p.x, y: p.y }).collect();
    Polygon::new(LineString::new(ring), vec![])
}

fn check(pts: &[Point], name: &str) -> Result<()> {
    if pts.len() < 3 || !polygon::is_simple(pts) {
        return Err(Error::Geometry(format!("region {name} is not a simple polygon")));
    }
    Ok(())
}

/// Overlap areas of two simple polygons.
pub fn region_overlap_areas(a: &[Point], b: &[Point]) -> Result<OverlapAreas> {
    check(a, "A")?;
    check(b, "B")?;
    let (ga, gb) = (to_geo(a), to_geo(b));
    Ok(OverlapAreas {
        a_minus_b: ga.difference(&gb).unsigned_area(),
        b_minus_a: gb.difference(&ga).unsigned_area(),
        intersection: ga.intersection(&gb).unsigned_area(),
    })
}

/// Polygon of `A ∩ B` as a list of outer rings.
pub fn intersection_rings(a: &[Point], b: &[Point]) -> Result<Vec<Vec<Point>>> {
    check(a, "A")?;
    check(b, "B")?;
    let mp = to_geo(a).intersection(&to_geo(b));
    Ok(mp
        .0
        .iter()
        .map(|poly| {
            let mut ring: Vec<Point> = poly.exterior().coords().map(|c| Point::new(c.x, c.y)).collect();
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            ring
        })
        .collect())
}

/// Relative domain error `|A Δ B| / |A|`.
pub fn domain_error(truth: &[Point], recovered: &[Point]) -> Result<f64> {
    let o = region_overlap_areas(truth, recovered)?;
    Ok(o.symmetric_difference() / polygon::signed_area(truth).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disc(r: f64, n: usize, c: Point) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Point::new(c.x + r * t.cos(), c.y + r * t.sin())
            })
            .collect()
    }

    #[test]
    fn nested_discs() {
        let a = disc(1.0, 4096, Point::default());
        let b = disc(0.5, 4096, Point::default());
        let o = region_overlap_areas(&a, &b).unwrap();
        let area_b = polygon::signed_area(&b);
        let area_a = polygon::signed_area(&a);
        assert!(o.b_minus_a.abs() < 1e-9);
        assert!((o.intersection - area_b).abs() < 1e-9);
        assert!((o.a_minus_b - (area_a - area_b)).abs() < 1e-9);
    }

    #[test]
    fn identical_regions_have_zero_error() {
        let a = disc(1.0, 512, Point::new(0.3, 0.1));
        assert!(domain_error(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn self_intersecting_input_rejected() {
        let bow = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let sq = disc(1.0, 4, Point::default());
        assert!(region_overlap_areas(&bow, &sq).is_err());
    }
}
