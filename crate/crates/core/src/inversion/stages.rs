//! Parameter layouts for the reconstruction stages.

use faer::Mat;

use super::config::{InversionState, RegWeights, Stage, StageConfig};
use super::gauss_newton::{gauss_newton, LeastSquares, Residuals};
use super::regularization::{Penalties, Regularizer, SparseResiduals};
use crate::cem::{AnisotropicField, PixelModel, Protocol};
use crate::geometry::{Mesh, PixelGrid};
use crate::{Error, Result};

/// Initial contact impedance.
pub const Z_INIT: f64 = 1e-2;

/// Largest change of any anisotropy angle in one Gauss-Newton step. Near
/// `λ = 1` the angles are barely determined by the data and unlimited
/// steps wander over many periods.
const THETA_STEP: f64 = std::f64::consts::FRAC_PI_8;

/// Forward model on a fixed mesh together with its pixel grid.
#[derive(Clone, Debug)]
pub struct InversionModel {
    model: PixelModel,
    grid: PixelGrid,
}

impl InversionModel {
    pub fn new(mesh: Mesh, grid: PixelGrid, protocol: Protocol) -> Result<Self> {
        let model = PixelModel::new(mesh, &grid, protocol)?;
        Ok(Self { model, grid })
    }

    pub fn pixel_model(&self) -> &PixelModel {
        &self.model
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn n_pixels(&self) -> usize {
        self.grid.len()
    }

    pub fn n_electrodes(&self) -> usize {
        self.model.n_electrodes()
    }

    /// Predicted readings for a state.
    pub fn predict(&self, state: &InversionState) -> Result<Vec<f64>> {
        let field = AnisotropicField::new(state.lambda, state.eta.clone(), state.theta.clone())?;
        self.model.predict(&field, &state.z)
    }

    fn check_data(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.model.n_data() {
            return Err(Error::InvalidParameter(format!(
                "expected {} readings, found {}",
                self.model.n_data(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("readings must be finite".into()));
        }
        Ok(())
    }

    fn check_state(&self, state: &InversionState) -> Result<()> {
        if state.z.len() != self.n_electrodes()
            || state.eta.len() != self.n_pixels()
            || state.theta.len() != self.n_pixels()
        {
            return Err(Error::InvalidParameter("state does not match the model".into()));
        }
        if !state.is_feasible() {
            return Err(Error::InvalidParameter("state is not feasible".into()));
        }
        Ok(())
    }
}

/// How `η` enters the optimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaMode {
    /// One value shared by every pixel.
    Scalar,
    /// One value per pixel.
    Pixel,
    Fixed,
}

/// Unknowns optimized in a stage; the others keep their current values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActiveSet {
    pub z: bool,
    pub eta: EtaMode,
    pub lambda: bool,
    pub theta: bool,
}

impl ActiveSet {
    pub const STAGE1: Self = Self { z: true, eta: EtaMode::Scalar, lambda: true, theta: true };
    pub const STAGE2: Self = Self { z: false, eta: EtaMode::Pixel, lambda: true, theta: true };
    pub const TRADITIONAL1: Self = Self { z: true, eta: EtaMode::Scalar, lambda: false, theta: false };
    pub const TRADITIONAL2: Self = Self { z: false, eta: EtaMode::Pixel, lambda: false, theta: false };
    pub const ETA_ONLY: Self = Self { z: false, eta: EtaMode::Pixel, lambda: false, theta: false };
}

struct StageProblem<'a> {
    model: &'a InversionModel,
    reg: Regularizer,
    data: &'a [f64],
    base: &'a InversionState,
    active: ActiveSet,
    /// Parameter index of every entry of `[z, η, λ, θ]`, if active.
    to_param: Vec<Option<usize>>,
    n_params: usize,
}

impl<'a> StageProblem<'a> {
    fn new(
        model: &'a InversionModel,
        data: &'a [f64],
        base: &'a InversionState,
        active: ActiveSet,
        weights: RegWeights,
    ) -> Result<Self> {
        weights.validate()?;
        model.check_data(data)?;
        model.check_state(base)?;
        if active.eta == EtaMode::Scalar && base.eta.iter().any(|&e| e != base.eta[0]) {
            return Err(Error::InvalidParameter("scalar η requires a constant η vector".into()));
        }
        let reg = Regularizer::new(weights, model.n_electrodes(), &model.grid);
        let ix = reg.index();
        let mut to_param = vec![None; ix.len()];
        let mut next = 0;
        if active.z {
            for l in 0..ix.n_electrodes {
                to_param[ix.z(l)] = Some(next);
                next += 1;
            }
        }
        match active.eta {
            EtaMode::Scalar => {
                for p in 0..ix.n_pixels {
                    to_param[ix.eta(p)] = Some(next);
                }
                next += 1;
            }
            EtaMode::Pixel => {
                for p in 0..ix.n_pixels {
                    to_param[ix.eta(p)] = Some(next);
                    next += 1;
                }
            }
            EtaMode::Fixed => {}
        }
        if active.lambda {
            to_param[ix.lambda()] = Some(next);
            next += 1;
        }
        if active.theta {
            for p in 0..ix.n_pixels {
                to_param[ix.theta(p)] = Some(next);
                next += 1;
            }
        }
        if next == 0 {
            return Err(Error::InvalidParameter("no active parameters".into()));
        }
        Ok(Self { model, reg, data, base, active, to_param, n_params: next })
    }

    fn pack(&self, s: &InversionState) -> Vec<f64> {
        let ix = self.reg.index();
        let mut x = vec![0.0; self.n_params];
        let vals = s.z.iter().chain(&s.eta).chain(std::iter::once(&s.lambda)).chain(&s.theta);
        for (i, v) in vals.enumerate() {
            if let Some(k) = self.to_param[i] {
                x[k] = *v;
            }
        }
        debug_assert_eq!(ix.len(), self.to_param.len());
        x
    }

    fn unpack(&self, x: &[f64]) -> InversionState {
        let ix = self.reg.index();
        let mut s = self.base.clone();
        let get = |i: usize, old: f64| self.to_param[i].map_or(old, |k| x[k]);
        for l in 0..ix.n_electrodes {
            s.z[l] = get(ix.z(l), s.z[l]);
        }
        for p in 0..ix.n_pixels {
            s.eta[p] = get(ix.eta(p), s.eta[p]);
            s.theta[p] = get(ix.theta(p), s.theta[p]);
        }
        s.lambda = get(ix.lambda(), s.lambda);
        s
    }

    fn penalty(&self, s: &InversionState) -> SparseResiduals {
        let full = self.reg.residuals(&s.z, &s.eta, s.lambda, &s.theta);
        let mut out = SparseResiduals { values: Vec::new(), offsets: vec![0], entries: Vec::new() };
        for i in 0..full.len() {
            let grad = full.gradient(i);
            let mapped: Vec<(usize, f64)> =
                grad.iter().filter_map(|&(j, v)| self.to_param[j].map(|k| (k, v))).collect();
            if mapped.is_empty() {
                // Constant in the active parameters; kept for the objective value.
                out.values.push(full.values[i]);
                out.offsets.push(out.entries.len());
                continue;
            }
            out.values.push(full.values[i]);
            out.entries.extend(mapped);
            out.offsets.push(out.entries.len());
        }
        out
    }

    fn field(s: &InversionState) -> Result<AnisotropicField> {
        AnisotropicField::new(s.lambda, s.eta.clone(), s.theta.clone())
    }
}

impl LeastSquares for StageProblem<'_> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn positive(&self) -> Vec<bool> {
        let ix = self.reg.index();
        let mut pos = vec![false; self.n_params];
        for (i, k) in self.to_param.iter().enumerate() {
            if let Some(k) = k {
                let is_theta = i >= ix.theta(0);
                pos[*k] = !is_theta;
            }
        }
        pos
    }

    fn max_step(&self) -> Vec<f64> {
        let ix = self.reg.index();
        let mut cap = vec![f64::INFINITY; self.n_params];
        for p in 0..ix.n_pixels {
            if let Some(k) = self.to_param[ix.theta(p)] {
                cap[k] = THETA_STEP;
            }
        }
        cap
    }

    fn residuals(&self, x: &[f64]) -> Result<Residuals> {
        let s = self.unpack(x);
        let v = self.model.model.predict(&Self::field(&s)?, &s.z)?;
        let data = v.iter().zip(self.data).map(|(a, b)| a - b).collect();
        Ok(Residuals { data, penalty: self.penalty(&s) })
    }

    fn linearize(&self, x: &[f64]) -> Result<(Residuals, Mat<f64>)> {
        let s = self.unpack(x);
        let lin = self.model.model.linearize(&Self::field(&s)?, &s.z)?;
        let nd = lin.v.len();
        let np = self.model.n_pixels();
        let mut jac = Mat::<f64>::zeros(nd, self.n_params);
        let mut col = 0;
        if self.active.z {
            for l in 0..s.z.len() {
                jac.col_mut(col).copy_from(lin.d_z.col(l));
                col += 1;
            }
        }
        match self.active.eta {
            EtaMode::Scalar => {
                for p in 0..np {
                    for i in 0..nd {
                        jac[(i, col)] += lin.d_eta[(i, p)];
                    }
                }
                col += 1;
            }
            EtaMode::Pixel => {
                for p in 0..np {
                    jac.col_mut(col).copy_from(lin.d_eta.col(p));
                    col += 1;
                }
            }
            EtaMode::Fixed => {}
        }
        if self.active.lambda {
            for i in 0..nd {
                jac[(i, col)] = lin.d_lambda[i];
            }
            col += 1;
        }
        if self.active.theta {
            for p in 0..np {
                jac.col_mut(col).copy_from(lin.d_theta.col(p));
                col += 1;
            }
        }
        debug_assert_eq!(col, self.n_params);
        let data = lin.v.iter().zip(self.data).map(|(a, b)| a - b).collect();
        Ok((Residuals { data, penalty: self.penalty(&s) }, jac))
    }
}

/// Penalty values of a state.
pub fn penalties(model: &InversionModel, state: &InversionState, weights: RegWeights) -> Penalties {
    Regularizer::new(weights, model.n_electrodes(), &model.grid).penalties(
        &state.z,
        &state.eta,
        state.lambda,
        &state.theta,
    )
}

/// Squared data misfit plus all penalties.
pub fn objective_aniso(
    model: &InversionModel,
    state: &InversionState,
    data: &[f64],
    weights: RegWeights,
) -> Result<f64> {
    weights.validate()?;
    model.check_data(data)?;
    model.check_state(state)?;
    let v = model.predict(state)?;
    let misfit: f64 = v.iter().zip(data).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(misfit + penalties(model, state, weights).total())
}

/// Runs barrier Gauss-Newton over the active unknowns, starting at `init`.
pub fn optimize(
    model: &InversionModel,
    data: &[f64],
    init: &InversionState,
    active: ActiveSet,
    weights: RegWeights,
    cfg: &StageConfig,
    initial_barrier: Option<f64>,
    stage: Stage,
) -> Result<InversionState> {
    let problem = StageProblem::new(model, data, init, active, weights)?;
    let x0 = problem.pack(init);
    let out = gauss_newton(&problem, &x0, cfg, initial_barrier)?;
    let mut state = problem.unpack(&out.x);
    state.objective_history = out.history;
    state.flags = out.flags;
    state.barrier_weight = out.barrier_weight;
    state.stage = stage;
    Ok(state)
}

/// Homogeneous starting state: `z = 10⁻²`, `λ = 1`, `θ = 0` and `η` from a
/// golden-section fit of a constant isotropic conductivity.
pub fn initial_state(model: &InversionModel, data: &[f64]) -> Result<InversionState> {
    model.check_data(data)?;
    let np = model.n_pixels();
    let l = model.n_electrodes();
    let state_for = |eta: f64| InversionState {
        z: vec![Z_INIT; l],
        eta: vec![eta; np],
        lambda: 1.0,
        theta: vec![0.0; np],
        objective_history: Vec::new(),
        stage: Stage::Initial,
        flags: Default::default(),
        barrier_weight: 0.0,
    };
    let misfit = |log_eta: f64| -> Result<f64> {
        let v = model.predict(&state_for(log_eta.exp()))?;
        Ok(v.iter().zip(data).map(|(a, b)| (a - b).powi(2)).sum())
    };
    // Readings scale roughly like 1/η.
    let v1 = model.predict(&state_for(1.0))?;
    let num: f64 = v1.iter().map(|v| v * v).sum();
    let den: f64 = v1.iter().zip(data).map(|(a, b)| a * b).sum();
    if !(den > 0.0) || !(num > 0.0) {
        return Err(Error::NonConvergence("readings are not positively correlated with a homogeneous model".into()));
    }
    let guess = (num / den).ln();
    let log_eta = golden_section(misfit, guess - 10f64.ln(), guess + 10f64.ln(), 1e-8)?;
    Ok(state_for(log_eta.exp()))
}

/// Minimizer of a unimodal function on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// First stage: scalar `η`, `λ`, pixelwise `θ` and the contact impedances.
pub fn run_stage1(
    model: &InversionModel,
    data: &[f64],
    weights: RegWeights,
    cfg: &StageConfig,
) -> Result<InversionState> {
    let init = initial_state(model, data)?;
    optimize(model, data, &init, ActiveSet::STAGE1, weights, cfg, None, Stage::Stage1)
}

/// Second stage: contact impedances frozen, `η` promoted to one value per
/// pixel, `λ` and `θ` refined.
pub fn run_stage2(
    model: &InversionModel,
    data: &[f64],
    stage1: &InversionState,
    weights: RegWeights,
    cfg: &StageConfig,
) -> Result<InversionState> {
    let init = promote(stage1);
    optimize(model, data, &init, ActiveSet::STAGE2, weights, cfg, None, Stage::Stage2)
}

/// Clears the optimization record; every pixel of `η` takes the
/// stage-one value (already the case for scalar-`η` states).
pub fn promote(state: &InversionState) -> InversionState {
    let mut s = state.clone();
    s.objective_history.clear();
    s.flags = Default::default();
    s
}

/// Isotropic two-stage reconstruction with `λ = 1` and `θ = 0`.
pub fn reconstruct_traditional(
    model: &InversionModel,
    data: &[f64],
    weights: RegWeights,
    cfg: &StageConfig,
) -> Result<InversionState> {
    let init = initial_state(model, data)?;
    let first = optimize(model, data, &init, ActiveSet::TRADITIONAL1, weights, cfg, None, Stage::Traditional1)?;
    let mut second =
        optimize(model, data, &promote(&first), ActiveSet::TRADITIONAL2, weights, cfg, None, Stage::Traditional2)?;
    second.flags.stalled |= first.flags.stalled;
    second.flags.damped |= first.flags.damped;
    second.flags.max_iters |= first.flags.max_iters;
    Ok(second)
}
