//! Beltrami coefficients sampled on a periodic grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cem::{AnisotropicField, SymTensor};
use crate::geometry::{Domain2D, PixelGrid, Point};
use crate::{Error, Result};

/// Grid and iteration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeltramiConfig {
    /// Grid points per side; a power of two.
    pub n: usize,
    /// Sup-norm increment that ends the Neumann series.
    pub tol: f64,
    pub max_terms: usize,
    /// Smooth the coefficient with a Gaussian one pixel wide.
    pub mollify: bool,
}

impl Default for BeltramiConfig {
    fn default() -> Self {
        Self { n: 512, tol: 1e-9, max_terms: 200, mollify: false }
    }
}

impl BeltramiConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() || self.n < 8 {
            return Err(Error::InvalidParameter("grid size must be a power of two >= 8".into()));
        }
        if !(self.tol > 0.0) || self.max_terms == 0 {
            return Err(Error::InvalidParameter("invalid Neumann series settings".into()));
        }
        Ok(())
    }
}

/// Beltrami coefficient of the map that makes `g` isotropic under
/// push-forward: `(g₂₂ − g₁₁ − 2i g₁₂) / (g₁₁ + g₂₂ + 2√det g)`.
/// Its modulus is the anisotropy `(√λ − 1)/(√λ + 1)`.
pub fn beltrami_coefficient(g: &SymTensor) -> Complex64 {
    let den = g.xx + g.yy + 2.0 * g.det().max(0.0).sqrt();
    Complex64::new(g.yy - g.xx, -2.0 * g.xy) / den
}

/// Values on the nodes `center + (i − n/2, j − n/2)·δ`, row-major with `j`
/// (the y index) outer. The periodic cell is `[−s, s)²` around `center`
/// with `s = nδ/2`; `μ` vanishes outside the disc of radius
/// `support_radius ≤ s/2` around `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientGrid {
    pub n: usize,
    pub center: Point,
    pub delta: f64,
    pub support_radius: f64,
    pub mu: Vec<Complex64>,
    /// `max |μ|`.
    pub c0: f64,
}

impl CoefficientGrid {
    pub fn new(n: usize, center: Point, delta: f64, support_radius: f64, mu: Vec<Complex64>) -> Result<Self> {
        if !n.is_power_of_two() || n < 8 || mu.len() != n * n {
            return Err(Error::InvalidParameter("grid must be n×n with n a power of two".into()));
        }
        if !(delta > 0.0) || !(support_radius > 0.0) {
            return Err(Error::InvalidParameter("grid spacing and support must be positive".into()));
        }
        let s = 0.5 * n as f64 * delta;
        if support_radius > 0.5 * s * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "support radius {support_radius} exceeds half the cell half-width {s}"
            )));
        }
        let mut c0: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let m = mu[j * n + i];
                if !m.re.is_finite() || !m.im.is_finite() {
                    return Err(Error::InvalidParameter("coefficient is not finite".into()));
                }
                if m.norm() >= 1.0 {
                    return Err(Error::InvalidParameter("|μ| >= 1 violates ellipticity".into()));
                }
                let x = node(center, delta, n, i, j);
                if m != Complex64::new(0.0, 0.0) && x.dist(center) > support_radius {
                    return Err(Error::InvalidParameter("coefficient does not vanish outside its support".into()));
                }
                c0 = c0.max(m.norm());
            }
        }
        Ok(Self { n, center, delta, support_radius, mu, c0 })
    }

    /// Half-width of the periodic cell.
    pub fn half_width(&self) -> f64 {
        0.5 * self.n as f64 * self.delta
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        node(self.center, self.delta, self.n, i, j)
    }

    /// Index of the node nearest to `p`, if `p` is inside the cell.
    pub fn nearest_node(&self, p: Point) -> Option<(usize, usize)> {
        let h = self.n as f64 / 2.0;
        let fi = ((p.x - self.center.x) / self.delta + h).round();
        let fj = ((p.y - self.center.y) / self.delta + h).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.n as f64 || fj >= self.n as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }
}

pub(crate) fn node(center: Point, delta: f64, n: usize, i: usize, j: usize) -> Point {
    let h = n as f64 / 2.0;
    Point::new(center.x + (i as f64 - h) * delta, center.y + (j as f64 - h) * delta)
}

/// Samples the coefficient of `field` (one value per pixel) on a grid whose
/// nodes include every pixel center, so pixel values are reproduced
/// exactly at the centers. Nodes outside the domain get `μ = 0`.
pub fn coefficient_from_field(
    field: &AnisotropicField,
    pixels: &PixelGrid,
    domain: &Domain2D,
    cfg: &BeltramiConfig,
) -> Result<CoefficientGrid> {
    cfg.validate()?;
    field.validate()?;
    if field.len() != pixels.len() {
        return Err(Error::InvalidParameter("field and pixel grid differ in size".into()));
    }
    let hp = pixels.pixel_size();
    let (lo, hi) = domain.bbox();
    let mid = Point::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
    let center = pixels.center(pixels.nearest(mid));
    let reach = domain.boundary().iter().map(|b| b.dist(center)).fold(0.0, f64::max);
    let margin = if cfg.mollify { 4.0 * hp } else { 0.0 };
    let radius = reach + margin;

    // Odd subdivision keeps nodes off pixel edges.
    let mut m = ((cfg.n as f64 * hp) / (4.0 * radius)).floor() as usize;
    if m % 2 == 0 {
        m = m.saturating_sub(1);
    }
    if m == 0 {
        return Err(Error::InvalidParameter(format!(
            "a {n}-point grid cannot resolve pixels of size {hp} over radius {radius}",
            n = cfg.n
        )));
    }
    let delta = hp / m as f64;
    let n = cfg.n;
    let mu_pixel: Vec<Complex64> = (0..field.len()).map(|k| beltrami_coefficient(&field.tensor(k))).collect();
    let mut mu = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            let x = node(center, delta, n, i, j);
            if x.dist(center) <= reach && domain.contains(x) {
                mu[j * n + i] = mu_pixel[pixels.nearest(x)];
            }
        }
    }
    if cfg.mollify {
        mu = super::solver::gaussian_smooth(&mu, n, delta, hp);
        for j in 0..n {
            for i in 0..n {
                if node(center, delta, n, i, j).dist(center) > radius {
                    mu[j * n + i] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    CoefficientGrid::new(n, center, delta, radius, mu)
}
