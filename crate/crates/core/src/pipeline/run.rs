//! The full reconstruction: two inversion stages, isotropization and the
//! Möbius fit.

use serde::{Deserialize, Serialize};

use super::maps::ComposedMap;
use crate::beltrami::{
    coefficient_from_field, isotropize, solve_beltrami, BeltramiConfig, ConformalImage, DeformationField,
};
use crate::cem::AnisotropicField;
use crate::geometry::polygon::is_simple;
use crate::geometry::{Domain2D, PixelGrid, Point};
use crate::inversion::{
    reconstruct_traditional, run_stage1, run_stage2, InversionModel, InversionState, RegWeights, StageConfig,
};
use crate::moebius::{fit, GeometricTargets, MoebiusConfig, MoebiusFit};
use crate::{Error, Result};

/// Settings of every reconstruction step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub stage: StageConfig,
    pub stage1: RegWeights,
    pub stage2: RegWeights,
    pub traditional: RegWeights,
    pub beltrami: BeltramiConfig,
    pub moebius: MoebiusConfig,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            stage: StageConfig::default(),
            stage1: RegWeights::stage1(),
            stage2: RegWeights::stage2(),
            traditional: RegWeights::traditional(),
            beltrami: BeltramiConfig::default(),
            moebius: MoebiusConfig::default(),
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        self.stage.validate()?;
        self.stage1.validate()?;
        self.stage2.validate()?;
        self.traditional.validate()?;
        self.beltrami.validate()?;
        self.moebius.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStage {
    Setup,
    Stage1,
    Stage2,
    Beltrami,
    Isotropize,
    Moebius,
    Assemble,
}

impl std::fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PipelineStage::Setup => "setup",
            PipelineStage::Stage1 => "stage 1",
            PipelineStage::Stage2 => "stage 2",
            PipelineStage::Beltrami => "Beltrami solve",
            PipelineStage::Isotropize => "isotropization",
            PipelineStage::Moebius => "Möbius fit",
            PipelineStage::Assemble => "assembly",
        };
        f.write_str(s)
    }
}

/// A failed run with whatever the completed stages produced.
#[derive(Debug, thiserror::Error)]
#[error("{stage} failed: {error}")]
pub struct PipelineFailure {
    pub stage: PipelineStage,
    #[source]
    pub error: Error,
    pub stage1: Option<InversionState>,
    pub stage2: Option<InversionState>,
}

/// Conductivity sample of the recovered image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSample {
    pub point: Point,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    /// Boundary of `Ω_c`, the image of the model boundary vertices.
    pub omega_c: Vec<Point>,
    /// `η` at the images of the pixel centers.
    pub gamma_c: Vec<GammaSample>,
    pub z_hat: Vec<f64>,
    pub field: AnisotropicField,
    pub stage1: InversionState,
    pub stage2: InversionState,
    pub deformation: DeformationField,
    pub image: ConformalImage,
    pub moebius: MoebiusFit,
    pub model_boundary: Vec<Point>,
    pub grid: PixelGrid,
    pub data: Vec<f64>,
    /// `‖V(stage 2) − V‖ / ‖V‖`.
    pub relative_residual: f64,
}

impl ReconstructionResult {
    pub fn map(&self) -> Result<ComposedMap<'_>> {
        ComposedMap::new(
            &self.deformation,
            self.moebius.m,
            &self.model_boundary,
            &self.omega_c,
            &self.grid,
            &self.gamma_c,
        )
    }

    /// `γ_c(y)`: the `η` of the pixel holding the preimage of `y`.
    pub fn gamma_at(&self, y: Point) -> Result<f64> {
        let x = self.map()?.inverse(y)?;
        Ok(self.field.eta[self.grid.nearest(x)])
    }
}

/// Result of the isotropic baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraditionalResult {
    pub state: InversionState,
    pub relative_residual: f64,
}

pub(crate) fn relative_residual(model: &InversionModel, state: &InversionState, data: &[f64]) -> Result<f64> {
    let v = model.predict(state)?;
    let num: f64 = v.iter().zip(data).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = data.iter().map(|b| b * b).sum();
    Ok((num / den).sqrt())
}

fn check_setup(data: &[f64], domain: &Domain2D, model: &InversionModel, targets: &GeometricTargets) -> Result<()> {
    targets.validate()?;
    if domain.n_electrodes() != model.n_electrodes() {
        return Err(Error::InvalidParameter("model domain and forward model differ in electrode count".into()));
    }
    if data.len() != model.pixel_model().n_data() {
        return Err(Error::InvalidParameter(format!(
            "expected {} readings, found {}",
            model.pixel_model().n_data(),
            data.len()
        )));
    }
    let lengths = domain.electrode_lengths();
    if targets.electrode_lengths_true.len() != lengths.len() {
        return Err(Error::InvalidParameter("target electrode count differs from the model".into()));
    }
    for (m, t) in lengths.iter().zip(&targets.electrode_lengths_true) {
        if (m - t).abs() > 1e-6 * t {
            return Err(Error::InvalidParameter(format!(
                "model electrode length {m} differs from the physical length {t}"
            )));
        }
    }
    Ok(())
}

/// Stage 1, stage 2, Beltrami solve, isotropization and Möbius fit.
pub fn run_full(
    data: &[f64],
    domain: &Domain2D,
    model: &InversionModel,
    targets: &GeometricTargets,
    cfg: &ReconstructionConfig,
) -> std::result::Result<ReconstructionResult, PipelineFailure> {
    let fail = |stage, error, s1: Option<&InversionState>, s2: Option<&InversionState>| PipelineFailure {
        stage,
        error,
        stage1: s1.cloned(),
        stage2: s2.cloned(),
    };
    cfg.validate().map_err(|e| fail(PipelineStage::Setup, e, None, None))?;
    check_setup(data, domain, model, targets).map_err(|e| fail(PipelineStage::Setup, e, None, None))?;
    log::info!("stage 1");
    let s1 = run_stage1(model, data, cfg.stage1, &cfg.stage).map_err(|e| fail(PipelineStage::Stage1, e, None, None))?;
    log::info!("stage 2");
    let s2 = run_stage2(model, data, &s1, cfg.stage2, &cfg.stage)
        .map_err(|e| fail(PipelineStage::Stage2, e, Some(&s1), None))?;
    finish(data, domain, model, s1, s2, targets, cfg)
}

/// Everything after the inversion stages.
pub fn finish(
    data: &[f64],
    domain: &Domain2D,
    model: &InversionModel,
    s1: InversionState,
    s2: InversionState,
    targets: &GeometricTargets,
    cfg: &ReconstructionConfig,
) -> std::result::Result<ReconstructionResult, PipelineFailure> {
    let fail = |stage, error| PipelineFailure { stage, error, stage1: Some(s1.clone()), stage2: Some(s2.clone()) };
    let grid = model.grid();
    let field = AnisotropicField::new(s2.lambda, s2.eta.clone(), s2.theta.clone())
        .map_err(|e| fail(PipelineStage::Beltrami, e))?;
    log::info!("Beltrami solve");
    let deform = |bc: &BeltramiConfig| {
        let coefficient = coefficient_from_field(&field, grid, domain, bc).map_err(|e| (PipelineStage::Beltrami, e))?;
        let deformation =
            solve_beltrami(&coefficient, bc.tol, bc.max_terms).map_err(|e| (PipelineStage::Beltrami, e))?;
        let image = isotropize(&field, grid, &deformation, domain).map_err(|e| (PipelineStage::Isotropize, e))?;
        Ok((deformation, image))
    };
    // A piecewise-constant coefficient can fold the map within a pixel of
    // the boundary under strong anisotropy; a smoothed one usually does not.
    let (deformation, image) = match deform(&cfg.beltrami) {
        Err((_, Error::DegenerateMap(msg))) if !cfg.beltrami.mollify => {
            log::warn!("{msg}; retrying with a mollified coefficient");
            deform(&BeltramiConfig { mollify: true, ..cfg.beltrami })
        }
        r => r,
    }
    .map_err(|(stage, e)| fail(stage, e))?;
    log::info!("Möbius fit");
    let moebius = fit(&image, targets, &cfg.moebius).map_err(|e| fail(PipelineStage::Moebius, e))?;

    let assemble = || -> Result<ReconstructionResult> {
        let omega_c = moebius.m.apply(&image.boundary)?;
        if !is_simple(&omega_c) {
            return Err(Error::DegenerateMap("recovered boundary is not simple".into()));
        }
        let points = moebius.m.apply(&image.samples.iter().map(|s| s.point).collect::<Vec<_>>())?;
        let gamma_c: Vec<GammaSample> =
            points.into_iter().zip(&field.eta).map(|(point, &value)| GammaSample { point, value }).collect();
        if gamma_c.iter().any(|g| !(g.value > 0.0)) || s2.z.iter().any(|z| !(*z > 0.0)) {
            return Err(Error::NonConvergence("reconstruction left the feasible region".into()));
        }
        let relative_residual = relative_residual(model, &s2, data)?;
        Ok(ReconstructionResult {
            omega_c,
            gamma_c,
            z_hat: s2.z.clone(),
            field: field.clone(),
            stage1: s1.clone(),
            stage2: s2.clone(),
            deformation: deformation.clone(),
            image: image.clone(),
            moebius: moebius.clone(),
            model_boundary: domain.boundary().to_vec(),
            grid: grid.clone(),
            data: data.to_vec(),
            relative_residual,
        })
    };
    assemble().map_err(|e| fail(PipelineStage::Assemble, e))
}

/// Isotropic two-stage baseline in the model domain.
pub fn run_traditional(data: &[f64], model: &InversionModel, cfg: &ReconstructionConfig) -> Result<TraditionalResult> {
    cfg.validate()?;
    let state = reconstruct_traditional(model, data, cfg.traditional, &cfg.stage)?;
    let relative_residual = relative_residual(model, &state, data)?;
    Ok(TraditionalResult { state, relative_residual })
}

/// Re-solves the Beltrami equation for a stored field; used when loading
/// results.
pub fn deformation_for(
    field: &AnisotropicField,
    grid: &PixelGrid,
    domain: &Domain2D,
    cfg: &BeltramiConfig,
) -> Result<DeformationField> {
    let coefficient = coefficient_from_field(field, grid, domain, cfg)?;
    solve_beltrami(&coefficient, cfg.tol, cfg.max_terms)
}
