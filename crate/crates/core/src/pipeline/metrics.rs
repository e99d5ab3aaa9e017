//! Scalar quality measures of a reconstruction.

use serde::{Deserialize, Serialize};

use super::run::ReconstructionResult;
use crate::geometry::polygon::{boundary_distance, closed_length, open_length, signed_area};
use crate::geometry::{domain_error, PixelGrid, Point};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `E(Ω_c)` against the truth, when known.
    pub domain_error: Option<f64>,
    /// `E(Ω_m)` against the truth, when known.
    pub model_domain_error: Option<f64>,
    pub perimeter: f64,
    pub electrode_lengths: Vec<f64>,
    pub lambda: f64,
    pub relative_residual: f64,
    pub max_anisotropy: f64,
    pub c0: f64,
    pub neumann_terms: usize,
    pub far_field_bound: f64,
    pub moebius_objective: f64,
}

pub fn metrics(r: &ReconstructionResult, truth: Option<&[Point]>) -> Result<Metrics> {
    let electrode_lengths = r
        .image
        .electrode_arcs
        .iter()
        .map(|arc| r.moebius.m.apply(arc).map(|a| open_length(&a)))
        .collect::<Result<Vec<_>>>()?;
    let (domain_error, model_domain_error) = match truth {
        Some(t) => (Some(domain_error(t, &r.omega_c)?), Some(domain_error(t, &r.model_boundary)?)),
        None => (None, None),
    };
    Ok(Metrics {
        domain_error,
        model_domain_error,
        perimeter: closed_length(&r.omega_c),
        electrode_lengths,
        lambda: r.field.lambda,
        relative_residual: r.relative_residual,
        max_anisotropy: r.image.max_anisotropy,
        c0: r.deformation.c0,
        neumann_terms: r.deformation.terms(),
        far_field_bound: r.deformation.far_field_bound,
        moebius_objective: r.moebius.objective,
    })
}

/// Total variation `Σ |v_i − v_j| h` over neighboring pixel pairs whose
/// centers both lie within `fraction · √(area/π)` of the boundary.
pub fn annulus_total_variation(grid: &PixelGrid, values: &[f64], boundary: &[Point], fraction: f64) -> f64 {
    let width = fraction * (signed_area(boundary).abs() / std::f64::consts::PI).sqrt();
    let inside: Vec<bool> = (0..grid.len()).map(|k| boundary_distance(boundary, grid.center(k)) <= width).collect();
    let h = grid.pixel_size();
    let mut tv = 0.0;
    for k in 0..grid.len() {
        if !inside[k] {
            continue;
        }
        for j in grid.neighbors(k) {
            if j > k && inside[j] {
                tv += (values[k] - values[j]).abs() * h;
            }
        }
    }
    tv
}
