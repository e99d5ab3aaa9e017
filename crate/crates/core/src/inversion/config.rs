//! Regularization weights, solver settings and inversion state.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tikhonov weights.
///
/// * `alpha0`, `alpha1`: size and cyclic smoothness of the contact impedances.
/// * `alpha2`, `alpha3`: size and 4-neighbor smoothness of `η`.
/// * `alpha4`, `alpha5`: size of `θ` and smoothness of `e^{iθ}`.
/// * `alpha6`: distance of `λ` from one.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegWeights {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub alpha6: f64,
}

impl RegWeights {
    /// Stage 1: scalar `η`, contact impedances estimated.
    pub fn stage1() -> Self {
        Self { alpha0: 10.0, alpha1: 50.0, alpha4: 1e-5, alpha5: 1e-1, alpha6: 1.0, ..Self::default() }
    }

    /// Stage 2: pixelwise `η`, contact impedances frozen.
    pub fn stage2() -> Self {
        Self { alpha2: 0.0, alpha3: 1e-7, alpha4: 0.0, alpha5: 1e-7, alpha6: 1e-5, ..Self::default() }
    }

    /// Isotropic baseline.
    pub fn traditional() -> Self {
        Self { alpha0: 10.0, alpha1: 50.0, alpha2: 5e-7, alpha3: 5e-6, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha1, self.alpha2, self.alpha3, self.alpha4, self.alpha5, self.alpha6];
        if all.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter("regularization weights must be >= 0".into()));
        }
        Ok(())
    }
}

/// Gauss-Newton and barrier settings for one stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    /// Gauss-Newton iterations per barrier round.
    pub max_iters: usize,
    /// Relative objective decrease that ends a round.
    pub tolerance: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    /// Step reduction factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Fraction of the distance to the positivity boundary a step may cover.
    pub boundary_fraction: f64,
    /// Initial barrier weight relative to the initial data misfit.
    pub barrier_initial: f64,
    /// Barrier weight multiplier between rounds.
    pub barrier_decay: f64,
    pub barrier_rounds: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tolerance: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            boundary_fraction: 0.99,
            barrier_initial: 1e-2,
            barrier_decay: 0.1,
            barrier_rounds: 4,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tolerance > 0.0
            && self.barrier_decay > 0.0
            && self.barrier_decay < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.boundary_fraction > 0.0
            && self.boundary_fraction < 1.0
            && self.barrier_initial >= 0.0
            && self.barrier_rounds > 0;
        if !ok {
            return Err(Error::InvalidParameter("invalid stage configuration".into()));
        }
        Ok(())
    }
}

/// One accepted Gauss-Newton iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: usize,
    /// Objective including the barrier term.
    pub objective: f64,
    /// Squared data misfit.
    pub misfit: f64,
    pub barrier_weight: f64,
}

/// Conditions met during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Flags {
    /// A line search failed; the best iterate was returned.
    pub stalled: bool,
    /// Levenberg damping was needed to solve the normal equations.
    pub damped: bool,
    /// A barrier round hit the iteration limit.
    pub max_iters: bool,
}

/// Which stage produced a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    Stage1,
    Stage2,
    Traditional1,
    Traditional2,
    EtaRefit,
}

/// Estimated parameters with their optimization record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionState {
    pub z: Vec<f64>,
    pub eta: Vec<f64>,
    pub lambda: f64,
    pub theta: Vec<f64>,
    pub objective_history: Vec<HistoryEntry>,
    pub stage: Stage,
    pub flags: Flags,
    /// Barrier weight of the last round.
    pub barrier_weight: f64,
}

impl InversionState {
    pub fn is_feasible(&self) -> bool {
        self.lambda > 0.0 && self.z.iter().all(|&v| v > 0.0) && self.eta.iter().all(|&v| v > 0.0)
    }

    /// Final squared data misfit, if any iterate was recorded.
    pub fn final_misfit(&self) -> Option<f64> {
        self.objective_history.last().map(|h| h.misfit)
    }
}
