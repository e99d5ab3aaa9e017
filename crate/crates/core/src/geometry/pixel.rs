//! Square pixel grids covering a domain.

use serde::{Deserialize, Serialize};

use super::domain::Domain2D;
use super::mesh::Mesh;
use super::polygon::{self, Point};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PixelGridRaw {
    origin: Point,
    pixel_size: f64,
    nx: usize,
    ny: usize,
    inside: Vec<bool>,
}

/// Uniform grid of square pixels; only pixels whose centers lie strictly
/// inside the domain are active. Active pixels are numbered row by row,
/// bottom row first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PixelGridRaw", into = "PixelGridRaw")]
pub struct PixelGrid {
    origin: Point,
    pixel_size: f64,
    nx: usize,
    ny: usize,
    inside: Vec<bool>,
    cell_to_pixel: Vec<Option<usize>>,
    cells: Vec<(usize, usize)>,
}

impl TryFrom<PixelGridRaw> for PixelGrid {
    type Error = Error;
    fn try_from(r: PixelGridRaw) -> Result<Self> {
        PixelGrid::new(r.origin, r.pixel_size, r.nx, r.ny, r.inside)
    }
}

impl From<PixelGrid> for PixelGridRaw {
    fn from(g: PixelGrid) -> Self {
        PixelGridRaw { origin: g.origin, pixel_size: g.pixel_size, nx: g.nx, ny: g.ny, inside: g.inside }
    }
}

impl PixelGrid {
    pub fn new(origin: Point, pixel_size: f64, nx: usize, ny: usize, inside: Vec<bool>) -> Result<Self> {
        if !(pixel_size > 0.0) || nx == 0 || ny == 0 || inside.len() != nx * ny {
            return Err(Error::Geometry("inconsistent pixel grid".into()));
        }
        let mut cell_to_pixel = vec![None; nx * ny];
        let mut cells = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                if inside[iy * nx + ix] {
                    cell_to_pixel[iy * nx + ix] = Some(cells.len());
                    cells.push((ix, iy));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Geometry("pixel grid has no active pixels".into()));
        }
        Ok(Self { origin, pixel_size, nx, ny, inside, cell_to_pixel, cells })
    }

    /// Number of active pixels.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Cell indices `(ix, iy)` of active pixel `k`.
    pub fn cell(&self, k: usize) -> (usize, usize) {
        self.cells[k]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        let h = self.pixel_size;
        Point::new(self.origin.x + (ix as f64 + 0.5) * h, self.origin.y + (iy as f64 + 0.5) * h)
    }

    pub fn center(&self, k: usize) -> Point {
        let (ix, iy) = self.cells[k];
        self.cell_center(ix, iy)
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    /// Active pixel at cell `(ix, iy)`, if any.
    pub fn pixel_at_cell(&self, ix: isize, iy: isize) -> Option<usize> {
        if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        self.cell_to_pixel[iy as usize * self.nx + ix as usize]
    }

    /// Active pixel whose square contains `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let ix = ((p.x - self.origin.x) / self.pixel_size).floor();
        let iy = ((p.y - self.origin.y) / self.pixel_size).floor();
        if !ix.is_finite() || !iy.is_finite() {
            return None;
        }
        self.pixel_at_cell(ix as isize, iy as isize)
    }

    /// Active pixel containing `p`, or else the active pixel with the nearest
    /// center.
    pub fn nearest(&self, p: Point) -> usize {
        if let Some(k) = self.locate(p) {
            return k;
        }
        (0..self.len())
            .min_by(|&a, &b| self.center(a).dist(p).total_cmp(&self.center(b).dist(p)))
            .expect("grid is non-empty")
    }

    /// Active 4-neighbors of pixel `k`.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (ix, iy) = self.cells[k];
        let (ix, iy) = (ix as isize, iy as isize);
        [(ix - 1, iy), (ix + 1, iy), (ix, iy - 1), (ix, iy + 1)]
            .into_iter()
            .filter_map(move |(a, b)| self.pixel_at_cell(a, b))
    }

    /// Maps every mesh element to the pixel containing its centroid, or the
    /// nearest pixel when the centroid falls in an inactive cell.
    pub fn element_map(&self, mesh: &Mesh) -> Vec<usize> {
        (0..mesh.n_elements()).map(|t| self.nearest(mesh.centroid(t))).collect()
    }
}

fn grid_for_size(domain: &Domain2D, h: f64) -> Result<PixelGrid> {
    let (lo, hi) = domain.bbox();
    let nx = (((hi.x - lo.x) / h) - 1e-9).ceil().max(1.0) as usize;
    let ny = (((hi.y - lo.y) / h) - 1e-9).ceil().max(1.0) as usize;
    let c = Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let origin = Point::new(c.x - 0.5 * nx as f64 * h, c.y - 0.5 * ny as f64 * h);
    let tol = 1e-9 * h;
    let mut inside = vec![false; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Point::new(origin.x + (ix as f64 + 0.5) * h, origin.y + (iy as f64 + 0.5) * h);
            inside[iy * nx + ix] = domain.contains(p) && polygon::boundary_distance(domain.boundary(), p) > tol;
        }
    }
    PixelGrid::new(origin, h, nx, ny, inside)
}

/// Pixel grid over the domain with about `target_pixels` active pixels
/// (within 10%).
pub fn make_pixel_grid(domain: &Domain2D, target_pixels: usize) -> Result<PixelGrid> {
    if target_pixels == 0 {
        return Err(Error::InvalidParameter("target pixel count must be positive".into()));
    }
    let target = target_pixels as f64;
    let mut h = (domain.area() / target).sqrt();
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut best: Option<(f64, PixelGrid)> = None;
    for _ in 0..60 {
        let g = grid_for_size(domain, h)?;
        let count = g.len() as f64;
        let err = (count - target).abs() / target;
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, g));
        }
        if err < 0.01 {
            break;
        }
        if count > target {
            lo = h;
        } else {
            hi = h;
        }
        h = if lo > 0.0 && hi.is_finite() { 0.5 * (lo + hi) } else { h * (count / target).sqrt() };
    }
    let (err, g) = best.expect("at least one grid");
    if err > 0.10 {
        return Err(Error::Geometry(format!("could not place {target_pixels} pixels within 10% (best {})", g.len())));
    }
    Ok(g)
}
