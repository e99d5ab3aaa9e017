//! Push-forward of the anisotropic reconstruction by the isothermal map.

use serde::{Deserialize, Serialize};

use super::coefficient::{coefficient_from_field, BeltramiConfig};
use super::solver::{solve_beltrami, DeformationField};
use crate::cem::{AnisotropicField, SymTensor};
use crate::geometry::polygon::{is_simple, open_length};
use crate::geometry::{Domain2D, PixelGrid, Point};
use crate::{Error, Result};

/// Conductivity sample of the isotropized image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductivitySample {
    /// Image of the pixel center.
    pub point: Point,
    /// `(1,1)` entry of the pushed-forward tensor.
    pub gamma: f64,
    /// Remaining anisotropy `(√λ − 1)/(√λ + 1)` of the pushed-forward tensor.
    pub anisotropy: f64,
    /// `√det` of the pushed-forward tensor.
    pub sqrt_det: f64,
}

/// Image `F(Ω_m)` of the model domain with its electrodes and conductivity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalImage {
    pub boundary: Vec<Point>,
    /// Mapped boundary points of every electrode, in order.
    pub electrode_arcs: Vec<Vec<Point>>,
    pub electrode_lengths: Vec<f64>,
    pub samples: Vec<ConductivitySample>,
    pub max_anisotropy: f64,
}

/// Push-forward `F' γ F'ᵀ / det F'`.
pub fn push_forward(g: &SymTensor, jac: &[[f64; 2]; 2]) -> Result<SymTensor> {
    let [[a, b], [c, d]] = *jac;
    let det = a * d - b * c;
    if !(det > 0.0) {
        return Err(Error::DegenerateMap("map is not orientation preserving".into()));
    }
    // (J G Jᵀ)_{ij} with G = [[xx, xy], [xy, yy]].
    let xx = a * a * g.xx + 2.0 * a * b * g.xy + b * b * g.yy;
    let xy = a * c * g.xx + (a * d + b * c) * g.xy + b * d * g.yy;
    let yy = c * c * g.xx + 2.0 * c * d * g.xy + d * d * g.yy;
    Ok(SymTensor { xx: xx / det, xy: xy / det, yy: yy / det })
}

/// Maps the model boundary, electrodes and pixel centers through `F` and
/// pushes the conductivity forward. Pixel centers must be grid nodes of
/// `def` (as produced by [`coefficient_from_field`]).
pub fn isotropize(
    field: &AnisotropicField,
    pixels: &PixelGrid,
    def: &DeformationField,
    model: &Domain2D,
) -> Result<ConformalImage> {
    field.validate()?;
    if field.len() != pixels.len() {
        return Err(Error::InvalidParameter("field and pixel grid differ in size".into()));
    }
    let boundary = def.evaluate_map(model.boundary())?;
    if !is_simple(&boundary) {
        return Err(Error::DegenerateMap("mapped boundary is not simple".into()));
    }
    let mut electrode_arcs = Vec::with_capacity(model.n_electrodes());
    let mut electrode_lengths = Vec::with_capacity(model.n_electrodes());
    for e in model.electrodes() {
        let arc = def.evaluate_map(&model.arc_points(e.start_s, e.end_s))?;
        let len = open_length(&arc);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::DegenerateMap("mapped electrode has no length".into()));
        }
        electrode_arcs.push(arc);
        electrode_lengths.push(len);
    }

    let n = def.n;
    let tol = 1e-6 * def.delta;
    let mut samples = Vec::with_capacity(pixels.len());
    let mut max_anisotropy: f64 = 0.0;
    for k in 0..pixels.len() {
        let c = pixels.center(k);
        let hw = n as f64 / 2.0;
        let fi = (c.x - def.center.x) / def.delta + hw;
        let fj = (c.y - def.center.y) / def.delta + hw;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() * def.delta > tol || (fj - j).abs() * def.delta > tol {
            return Err(Error::InvalidParameter("pixel centers are not grid nodes".into()));
        }
        let idx = j as usize * n + i as usize;
        let g = push_forward(&field.tensor(k), &def.jacobian_matrix(idx))?;
        let r = g.anisotropy().sqrt();
        let a = (r - 1.0) / (r + 1.0);
        max_anisotropy = max_anisotropy.max(a);
        let h = def.h[idx];
        samples.push(ConductivitySample {
            point: Point::new(c.x + h.re, c.y + h.im),
            gamma: g.xx,
            anisotropy: a,
            sqrt_det: g.det().sqrt(),
        });
    }
    Ok(ConformalImage { boundary, electrode_arcs, electrode_lengths, samples, max_anisotropy })
}

/// Coefficient, Beltrami solve and push-forward in one call.
pub fn isotropize_field(
    field: &AnisotropicField,
    pixels: &PixelGrid,
    model: &Domain2D,
    cfg: &BeltramiConfig,
) -> Result<(DeformationField, ConformalImage)> {
    let grid = coefficient_from_field(field, pixels, model, cfg)?;
    let def = solve_beltrami(&grid, cfg.tol, cfg.max_terms)?;
    let image = isotropize(field, pixels, &def, model)?;
    Ok((def, image))
}
