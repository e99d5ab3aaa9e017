//! Truth and result bundles on disk.
//!
//! A result bundle holds everything needed to rebuild the in-memory result:
//! the stage states, the model discretization and the measurements. Loading
//! re-runs the deterministic steps after the inversion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::files::{create_dir, read_json, write_json, write_points_csv, write_raster_csv, write_samples_csv};
use crate::cem::{simulate, MeasurementSet, Phantom};
use crate::geometry::{generate_mesh, Domain2D, Mesh, PixelGrid, Point};
use crate::inversion::{InversionModel, InversionState};
use crate::moebius::{GeometricTargets, MoebiusFit};
use crate::pipeline::{
    finish, metrics, rasterize, Metrics, PipelineFailure, PipelineStage, Raster, ReconstructionConfig,
    ReconstructionResult, TraditionalResult,
};
use crate::{Error, Result};

/// Inclusion conductivities relative to the background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contrasts {
    pub lungs: f64,
    pub heart: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub phantom: Phantom,
    /// Present for the default lungs-and-heart phantom.
    pub contrasts: Option<Contrasts>,
    pub contact_impedances: Vec<f64>,
    pub mesh_elements: usize,
    pub config: RunConfig,
}

/// Simulated measurements on `truth` with the configured phantom.
pub fn simulate_measurements(cfg: &RunConfig, truth: &Domain2D) -> Result<(MeasurementSet, TruthRecord)> {
    cfg.validate()?;
    let mesh = generate_mesh(truth, cfg.truth.mesh_elements)?;
    let phantom = cfg.phantom(truth);
    let z = cfg.contact_impedances();
    let (_, noisy) = simulate(&mesh, &phantom.on_mesh(&mesh), &z, &cfg.protocol(), cfg.noise_sigma, cfg.seed)?;
    let l = cfg.truth.shape.n_electrodes;
    let ms = MeasurementSet::adjacent(l, cfg.truth.amplitude, noisy, cfg.noise_sigma, cfg.seed);
    let record = TruthRecord {
        contrasts: cfg.truth.inclusions.is_none().then_some(Contrasts { lungs: 1.0 / 1.55, heart: 2.0 }),
        phantom,
        contact_impedances: z,
        mesh_elements: mesh.n_elements(),
        config: cfg.clone(),
    };
    Ok((ms, record))
}

/// Writes `measurements.json`, `truth_domain.json`, `truth.json` and
/// `truth_conductivity.csv`.
pub fn write_simulation(dir: &Path, ms: &MeasurementSet, truth: &Domain2D, record: &TruthRecord) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("measurements.json"), ms)?;
    write_json(&dir.join("truth_domain.json"), truth)?;
    write_json(&dir.join("truth.json"), record)?;
    let raster = Raster::sample(truth.boundary(), record.config.raster_resolution, |p| record.phantom.value_at(p))?;
    write_raster_csv(&dir.join("truth_conductivity.csv"), &raster)
}

/// Model discretization stored next to a result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelRecord {
    pub domain: Domain2D,
    pub mesh: Mesh,
    pub grid: PixelGrid,
}

impl ModelRecord {
    pub fn new(domain: &Domain2D, model: &InversionModel) -> Self {
        Self { domain: domain.clone(), mesh: model.pixel_model().forward().mesh().clone(), grid: model.grid().clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullRecord {
    pub config: ReconstructionConfig,
    pub targets: GeometricTargets,
    pub stage1: InversionState,
    pub stage2: InversionState,
    pub moebius: MoebiusFit,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraditionalRecord {
    pub config: ReconstructionConfig,
    pub state: InversionState,
    pub relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: PipelineStage,
    pub error: String,
    pub stage1: Option<InversionState>,
    pub stage2: Option<InversionState>,
}

/// Contents of `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultRecord {
    Full(FullRecord),
    Traditional(TraditionalRecord),
    Failed(FailureRecord),
}

fn write_common(dir: &Path, model: &ModelRecord, ms: &MeasurementSet, record: &ResultRecord) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("model.json"), model)?;
    write_json(&dir.join("measurements.json"), ms)?;
    write_json(&dir.join("result.json"), record)
}

/// Writes a full result: `result.json`, `omega_c.csv`, `gamma_c.csv` and
/// `gamma_c_raster.csv`, plus the model and measurements.
#[allow(clippy::too_many_arguments)]
pub fn save_result(
    dir: &Path,
    r: &ReconstructionResult,
    model: &ModelRecord,
    ms: &MeasurementSet,
    cfg: &ReconstructionConfig,
    targets: &GeometricTargets,
    truth: Option<&[Point]>,
    resolution: usize,
) -> Result<Metrics> {
    let m = metrics(r, truth)?;
    let record = ResultRecord::Full(FullRecord {
        config: *cfg,
        targets: targets.clone(),
        stage1: r.stage1.clone(),
        stage2: r.stage2.clone(),
        moebius: r.moebius.clone(),
        metrics: m.clone(),
    });
    write_common(dir, model, ms, &record)?;
    write_points_csv(&dir.join("omega_c.csv"), &r.omega_c)?;
    let (points, values): (Vec<Point>, Vec<f64>) = r.gamma_c.iter().map(|g| (g.point, g.value)).unzip();
    write_samples_csv(&dir.join("gamma_c.csv"), &points, &values)?;
    write_raster_csv(&dir.join("gamma_c_raster.csv"), &rasterize(&r.omega_c, &points, &values, resolution)?)?;
    Ok(m)
}

/// Writes the isotropic baseline; `gamma.csv` holds `η` at the pixel centers
/// of the model domain.
pub fn save_traditional(
    dir: &Path,
    t: &TraditionalResult,
    model: &ModelRecord,
    ms: &MeasurementSet,
    cfg: &ReconstructionConfig,
) -> Result<()> {
    let record = ResultRecord::Traditional(TraditionalRecord {
        config: *cfg,
        state: t.state.clone(),
        relative_residual: t.relative_residual,
    });
    write_common(dir, model, ms, &record)?;
    let centers: Vec<Point> = (0..model.grid.len()).map(|k| model.grid.center(k)).collect();
    write_samples_csv(&dir.join("gamma.csv"), &centers, &t.state.eta)
}

/// Partial bundle after a mid-pipeline failure.
pub fn save_failure(dir: &Path, f: &PipelineFailure, model: &ModelRecord, ms: &MeasurementSet) -> Result<()> {
    let record = ResultRecord::Failed(FailureRecord {
        stage: f.stage,
        error: f.error.to_string(),
        stage1: f.stage1.clone(),
        stage2: f.stage2.clone(),
    });
    write_common(dir, model, ms, &record)
}

/// A full result rebuilt from its bundle.
pub struct LoadedResult {
    pub result: ReconstructionResult,
    pub model: InversionModel,
    pub domain: Domain2D,
    pub measurements: MeasurementSet,
    pub record: FullRecord,
}

/// Model, measurements and `result.json` of a bundle.
pub fn load_record(dir: &Path) -> Result<(ModelRecord, MeasurementSet, ResultRecord)> {
    Ok((
        read_json(&dir.join("model.json"))?,
        read_json(&dir.join("measurements.json"))?,
        read_json(&dir.join("result.json"))?,
    ))
}

pub fn load_result(dir: &Path) -> Result<LoadedResult> {
    let (m, ms, record) = load_record(dir)?;
    let ResultRecord::Full(record) = record else {
        return Err(Error::Config(format!("{} does not hold a full reconstruction", dir.display())));
    };
    let model = InversionModel::new(m.mesh, m.grid, ms.protocol()?)?;
    let result = finish(
        &ms.voltages,
        &m.domain,
        &model,
        record.stage1.clone(),
        record.stage2.clone(),
        &record.targets,
        &record.config,
    )
    .map_err(|f: PipelineFailure| f.error)?;
    Ok(LoadedResult { result, model, domain: m.domain, measurements: ms, record })
}
