//! Shape-deforming reconstruction for two-dimensional electrical impedance
//! tomography.
//!
//! The reconstruction runs in a *model* domain whose boundary is only
//! approximately known. A two-stage anisotropic inversion absorbs the boundary
//! error into an anisotropic conductivity; a Beltrami equation then provides a
//! quasiconformal map that turns the anisotropy back into an isotropic image on
//! a deformed domain, and a Möbius transformation fixes the remaining conformal
//! freedom from the known electrode geometry.
//!
//! Modules, bottom-up:
//!
//! * [`geometry`]: closed polylines, domains with electrode arcs, meshes,
//!   pixel grids and overlap areas.
//! * [`cem`]: complete electrode model forward solver and Jacobians.
//! * [`inversion`]: regularized Gauss-Newton with a log-barrier.
//! * [`beltrami`]: Beltrami coefficients, the Beltrami solver, isotropization.
//! * [`moebius`]: Möbius normalization of the deformed domain.
//! * [`pipeline`]: end-to-end runs, consistency checks and difference images.
//! * [`io`]: run configuration and file formats.

pub mod beltrami;
pub mod cem;
pub mod error;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod moebius;
pub mod pipeline;

pub use error::{Error, Result};
pub use geometry::Point;
