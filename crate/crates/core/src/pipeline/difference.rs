//! Consistency of the composed maps and the two difference-imaging modes.

use serde::{Deserialize, Serialize};

use super::run::{ReconstructionConfig, ReconstructionResult};
use crate::geometry::overlap::intersection_rings;
use crate::geometry::polygon::{contains, signed_area};
use crate::geometry::Point;
use crate::inversion::{optimize, promote, ActiveSet, InversionModel, Stage};
use crate::{Error, Result};

/// Displacements of `Ḡ₂ ∘ Ḡ₁⁻¹` on the boundary of `Ω_{c,1}`, normalized by
/// its diameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    pub max: f64,
    pub mean: f64,
    pub diameter: f64,
    pub n_points: usize,
    /// Points where the inverse map failed; excluded from the statistics.
    pub n_failed: usize,
    /// `(y, Ḡ₂(Ḡ₁⁻¹(y)))` for every evaluated boundary point.
    pub pairs: Vec<(Point, Point)>,
}

fn diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max(p.dist(*q));
        }
    }
    d
}

fn same_model(r1: &ReconstructionResult, r2: &ReconstructionResult) -> Result<()> {
    let scale = diameter(&r1.model_boundary).max(f64::MIN_POSITIVE);
    let same = r1.model_boundary.len() == r2.model_boundary.len()
        && r1.model_boundary.iter().zip(&r2.model_boundary).all(|(a, b)| a.dist(*b) <= 1e-9 * scale)
        && r1.grid == r2.grid;
    if same {
        Ok(())
    } else {
        Err(Error::InvalidParameter("reconstructions use different model domains".into()))
    }
}

pub fn consistency_check(r1: &ReconstructionResult, r2: &ReconstructionResult) -> Result<ConsistencyStats> {
    same_model(r1, r2)?;
    let g1 = r1.map()?;
    let g2 = r2.map()?;
    let diameter = diameter(&r1.omega_c);
    let mut pairs = Vec::with_capacity(r1.omega_c.len());
    let mut n_failed = 0;
    for &y in &r1.omega_c {
        match g1.inverse(y).and_then(|x| g2.forward(x)) {
            Ok(z) => pairs.push((y, z)),
            Err(e) if e.is_numeric() => n_failed += 1,
            Err(e) => return Err(e),
        }
    }
    if pairs.is_empty() {
        return Err(Error::NonConvergence("no boundary point could be mapped".into()));
    }
    let d: Vec<f64> = pairs.iter().map(|(y, z)| y.dist(*z) / diameter).collect();
    Ok(ConsistencyStats {
        max: d.iter().copied().fold(0.0, f64::max),
        mean: d.iter().sum::<f64>() / d.len() as f64,
        diameter,
        n_points: r1.omega_c.len(),
        n_failed,
        pairs,
    })
}

/// Difference values at points of a recovered domain, with the preimage of
/// every point in the model domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceField {
    /// Region on which the field is defined.
    pub boundary: Vec<Point>,
    pub points: Vec<Point>,
    pub sources: Vec<Point>,
    pub values: Vec<f64>,
}

impl DifferenceField {
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Share of the energy at samples for which `inside(point, source)`
    /// holds.
    pub fn energy_fraction(&self, inside: impl Fn(Point, Point) -> bool) -> f64 {
        let total = self.energy();
        if total == 0.0 {
            return 0.0;
        }
        let local: f64 = (0..self.values.len())
            .filter(|&k| inside(self.points[k], self.sources[k]))
            .map(|k| self.values[k] * self.values[k])
            .sum();
        local / total
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Refits `η` alone, with `z`, `λ` and `θ` frozen at `r1`'s values, to the
/// baseline data of `r1` and to `v2`, both from `r1`'s stage-2 state. Returns
/// `η₂ − η₁` at the images of the pixel centers in `Ω_{c,1}`.
pub fn diff_fixed_geometry(
    r1: &ReconstructionResult,
    v2: &[f64],
    model: &InversionModel,
    cfg: &ReconstructionConfig,
) -> Result<DifferenceField> {
    cfg.validate()?;
    if model.grid() != &r1.grid {
        return Err(Error::InvalidParameter("model pixel grid differs from the reconstruction".into()));
    }
    let start = promote(&r1.stage2);
    let refit = |data: &[f64]| {
        optimize(model, data, &start, ActiveSet::ETA_ONLY, cfg.stage2, &cfg.stage, None, Stage::EtaRefit)
    };
    let eta1 = refit(&r1.data)?.eta;
    let eta2 = refit(v2)?.eta;
    Ok(DifferenceField {
        boundary: r1.omega_c.clone(),
        points: r1.gamma_c.iter().map(|g| g.point).collect(),
        sources: (0..r1.grid.len()).map(|k| r1.grid.center(k)).collect(),
        values: eta2.iter().zip(&eta1).map(|(b, a)| b - a).collect(),
    })
}

/// `γ_{c,2} − γ_{c,1}` on a regular grid over `Ω_{c,1} ∩ Ω_{c,2}` with about
/// `resolution` points across the larger side. Sources are preimages under
/// `r1`'s map.
pub fn diff_two_domains(
    r1: &ReconstructionResult,
    r2: &ReconstructionResult,
    resolution: usize,
) -> Result<DifferenceField> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("raster resolution must be at least 2".into()));
    }
    let region = intersection_rings(&r1.omega_c, &r2.omega_c)?
        .into_iter()
        .max_by(|a, b| signed_area(a).abs().total_cmp(&signed_area(b).abs()))
        .filter(|r| r.len() >= 3 && signed_area(r).abs() > 0.0)
        .ok_or_else(|| Error::Geometry("recovered domains do not intersect".into()))?;
    let (lo, hi) = region.iter().fold(
        (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(l, h), p| (Point::new(l.x.min(p.x), l.y.min(p.y)), Point::new(h.x.max(p.x), h.y.max(p.y))),
    );
    let step = (hi.x - lo.x).max(hi.y - lo.y) / resolution as f64;
    let (g1, g2) = (r1.map()?, r2.map()?);
    let mut field = DifferenceField { boundary: region.clone(), points: vec![], sources: vec![], values: vec![] };
    let ny = ((hi.y - lo.y) / step).ceil() as usize;
    let nx = ((hi.x - lo.x) / step).ceil() as usize;
    for j in 0..ny {
        for i in 0..nx {
            let y = Point::new(lo.x + (i as f64 + 0.5) * step, lo.y + (j as f64 + 0.5) * step);
            if !contains(&region, y) {
                continue;
            }
            let (Ok(x1), Ok(x2)) = (g1.inverse(y), g2.inverse(y)) else { continue };
            let a = r1.field.eta[r1.grid.nearest(x1)];
            let b = r2.field.eta[r2.grid.nearest(x2)];
            field.points.push(y);
            field.sources.push(x1);
            field.values.push(b - a);
        }
    }
    if field.points.is_empty() {
        return Err(Error::Geometry("no raster point inside the common region".into()));
    }
    Ok(field)
}

/// Nearest-sample raster of scattered values inside `boundary`; `None`
/// outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub origin: Point,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Option<f64>>,
}

impl Raster {
    /// Evaluates `f` at the cell centers inside `boundary`, with about
    /// `resolution` cells across the larger side of its bounding box.
    pub fn sample(boundary: &[Point], resolution: usize, mut f: impl FnMut(Point) -> f64) -> Result<Self> {
        if resolution < 2 || boundary.len() < 3 {
            return Err(Error::InvalidParameter("raster needs a polygon and a resolution of at least 2".into()));
        }
        let (lo, hi) = boundary.iter().fold(
            (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
            |(l, h), p| (Point::new(l.x.min(p.x), l.y.min(p.y)), Point::new(h.x.max(p.x), h.y.max(p.y))),
        );
        let step = (hi.x - lo.x).max(hi.y - lo.y) / resolution as f64;
        let nx = ((hi.x - lo.x) / step).ceil() as usize;
        let ny = ((hi.y - lo.y) / step).ceil() as usize;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let y = Point::new(lo.x + (i as f64 + 0.5) * step, lo.y + (j as f64 + 0.5) * step);
                values.push(contains(boundary, y).then(|| f(y)));
            }
        }
        Ok(Raster { origin: lo, step, nx, ny, values })
    }

    pub fn center(&self, i: usize, j: usize) -> Point {
        Point::new(self.origin.x + (i as f64 + 0.5) * self.step, self.origin.y + (j as f64 + 0.5) * self.step)
    }
}

pub fn rasterize(boundary: &[Point], points: &[Point], values: &[f64], resolution: usize) -> Result<Raster> {
    if points.len() != values.len() || points.is_empty() {
        return Err(Error::InvalidParameter("nothing to rasterize".into()));
    }
    Raster::sample(boundary, resolution, |y| {
        let k = (0..points.len()).min_by(|&a, &b| points[a].dist(y).total_cmp(&points[b].dist(y))).unwrap();
        values[k]
    })
}
