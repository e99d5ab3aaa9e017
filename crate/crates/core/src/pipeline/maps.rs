//! The composed map `Ḡ = M ∘ F_i` from the model domain to `Ω_c` and its
//! numerical inverse.

use super::run::GammaSample;
use crate::beltrami::DeformationField;
use crate::geometry::{PixelGrid, Point};
use crate::moebius::MoebiusParams;
use crate::{Error, Result};

/// Newton tolerance on `|x + h(x) − w|`.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITERS: usize = 50;

pub struct ComposedMap<'a> {
    def: &'a DeformationField,
    m: MoebiusParams,
    m_inv: MoebiusParams,
    /// Known (preimage, image) pairs used to start Newton.
    seeds: Vec<(Point, Point)>,
}

impl<'a> ComposedMap<'a> {
    pub fn new(
        def: &'a DeformationField,
        m: MoebiusParams,
        model_boundary: &[Point],
        omega_c: &[Point],
        grid: &PixelGrid,
        gamma_c: &[GammaSample],
    ) -> Result<Self> {
        let mut seeds: Vec<(Point, Point)> = model_boundary.iter().copied().zip(omega_c.iter().copied()).collect();
        seeds.extend(gamma_c.iter().enumerate().map(|(k, g)| (grid.center(k), g.point)));
        Ok(Self { def, m, m_inv: m.inverse()?, seeds })
    }

    pub fn forward(&self, x: Point) -> Result<Point> {
        let w = self.def.map_point(x)?;
        Ok(self.m.apply(&[w])?[0])
    }

    /// Preimage of `y`, by Newton's method on `x + h(x) = M⁻¹(y)` started
    /// from the preimage of the nearest known image.
    pub fn inverse(&self, y: Point) -> Result<Point> {
        let w = self.m_inv.apply(&[y])?[0];
        let mut x = self.seeds.iter().min_by(|a, b| a.1.dist(y).total_cmp(&b.1.dist(y))).map_or(w, |s| s.0);
        let eps = 1e-3 * self.def.delta;
        let scale = 1.0 + w.norm();
        for _ in 0..NEWTON_MAX_ITERS {
            let fx = self.def.map_point(x)?;
            let r = fx - w;
            if r.norm() <= NEWTON_TOL * scale {
                return Ok(x);
            }
            let dx = (self.def.map_point(Point::new(x.x + eps, x.y))?
                - self.def.map_point(Point::new(x.x - eps, x.y))?)
                * (0.5 / eps);
            let dy = (self.def.map_point(Point::new(x.x, x.y + eps))?
                - self.def.map_point(Point::new(x.x, x.y - eps))?)
                * (0.5 / eps);
            let det = dx.x * dy.y - dy.x * dx.y;
            if !(det > 0.0) {
                return Err(Error::NonConvergence("map Jacobian is singular during inversion".into()));
            }
            let step = Point::new((dy.y * r.x - dy.x * r.y) / det, (-dx.y * r.x + dx.x * r.y) / det);
            x = x - step;
        }
        Err(Error::NonConvergence(format!("inverse map did not converge at ({}, {})", y.x, y.y)))
    }
}
