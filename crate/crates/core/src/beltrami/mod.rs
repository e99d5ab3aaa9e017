//! Isothermal coordinates of an anisotropic conductivity via the Beltrami
//! equation.

pub mod coefficient;
pub mod isotropize;
pub mod solver;

pub use coefficient::{beltrami_coefficient, coefficient_from_field, BeltramiConfig, CoefficientGrid};
pub use isotropize::{isotropize, isotropize_field, push_forward, ConductivitySample, ConformalImage};
pub use solver::{solve_beltrami, DeformationDump, DeformationField};
