//! Regularized Gauss-Newton reconstruction of the anisotropic and the
//! isotropic conductivity models.

pub mod config;
pub mod gauss_newton;
pub mod regularization;
pub mod stages;

pub use config::{Flags, HistoryEntry, InversionState, RegWeights, Stage, StageConfig};
pub use gauss_newton::{gauss_newton, GnOutcome, LeastSquares, Residuals};
pub use regularization::{FullIndex, Penalties, Regularizer, SparseResiduals};
pub use stages::{
    initial_state, objective_aniso, optimize, penalties, promote, reconstruct_traditional, run_stage1, run_stage2,
    ActiveSet, EtaMode, InversionModel, Z_INIT,
};
