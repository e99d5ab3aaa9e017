//! Complete electrode model forward solver, Jacobians and synthetic data.

pub mod forward;
pub mod patterns;
pub mod pixel_model;
pub mod simulate;
pub mod tensor;

pub use forward::{solve_cem, CemSolution, Factorization, ForwardModel};
pub use patterns::{CurrentPatterns, MeasurementOperator, Protocol};
pub use pixel_model::{Linearization, PixelModel};
pub use simulate::{add_noise, simulate, Ellipse, Inclusion, MeasurementSet, Phantom};
pub use tensor::{tensor_at, tensor_derivs, AnisotropicField, SymTensor, TensorDerivs};
