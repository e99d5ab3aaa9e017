//! Möbius normalization of the isotropized domain.

pub mod fit;
pub mod transform;

pub use fit::{
    fit, objective, FitFlags, GeometricTargets, MeasureKind, MoebiusConfig, MoebiusFit, ObjectiveValue, POLE_PENALTY,
};
pub use transform::{cross_ratio, perimeter, MoebiusParams, A_MIN, POLE_EPS};
