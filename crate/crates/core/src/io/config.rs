//! Run configuration and model-domain specifications.

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cem::{Inclusion, Phantom, Protocol};
use crate::geometry::polygon::centroid;
use crate::geometry::{
    displace_electrodes, generate_mesh, make_chest_phantom, make_circle_domain, make_pixel_grid, ChestSpec, Domain2D,
    Point,
};
use crate::inversion::InversionModel;
use crate::moebius::{GeometricTargets, MeasureKind};
use crate::pipeline::ReconstructionConfig;
use crate::{Error, Result};

/// Physical domain, phantom and acquisition used for simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    pub shape: ChestSpec,
    /// Background sheet conductivity (mS).
    pub background: f64,
    /// Replaces the default lungs-and-heart inclusions when given.
    pub inclusions: Option<Vec<Inclusion>>,
    /// Injected current amplitude (mA).
    pub amplitude: f64,
    /// Contact impedance of electrode 0; electrode `ℓ` gets `z·(1 + spread·ℓ)`.
    pub contact_impedance: f64,
    pub contact_spread: f64,
    pub mesh_elements: usize,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            shape: ChestSpec::default(),
            background: 3.0,
            inclusions: None,
            amplitude: 3.0,
            contact_impedance: 3e-3,
            contact_spread: 0.03,
            mesh_elements: 19459,
        }
    }
}

/// Discretization of the model domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub mesh_elements: usize,
    pub pixels: usize,
    pub boundary_samples: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { mesh_elements: 11398, pixels: 2732, boundary_samples: 512 }
    }
}

/// Everything a run needs; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Noise standard deviation relative to `max|V|`.
    pub noise_sigma: f64,
    pub truth: TruthConfig,
    pub model: ModelConfig,
    pub reconstruction: ReconstructionConfig,
    pub beta: f64,
    pub measure: MeasureKind,
    /// Raster points across the larger side of exported images.
    pub raster_resolution: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            noise_sigma: 1e-3,
            truth: TruthConfig::default(),
            model: ModelConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            beta: 0.0,
            measure: MeasureKind::Perimeter,
            raster_resolution: 128,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.truth;
        let positive = [t.background, t.amplitude, t.contact_impedance, t.shape.perimeter, t.shape.electrode_length];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("truth parameters must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0)
            || !(self.beta >= 0.0)
            || !(t.contact_spread > -1.0 / t.shape.n_electrodes.max(1) as f64)
        {
            return Err(Error::Config("noise, beta and contact spread are out of range".into()));
        }
        if t.shape.n_electrodes < 2 || t.mesh_elements == 0 || self.model.mesh_elements == 0 || self.model.pixels == 0 {
            return Err(Error::Config("electrode, mesh and pixel counts must be positive".into()));
        }
        if self.model.boundary_samples < 3 || self.raster_resolution < 2 {
            return Err(Error::Config("boundary samples and raster resolution are too small".into()));
        }
        if let Some(inc) = &t.inclusions {
            if inc.iter().any(|i| !(i.conductivity > 0.0 && i.shape.a > 0.0 && i.shape.b > 0.0)) {
                return Err(Error::Config("inclusions need positive conductivity and semi-axes".into()));
            }
        }
        self.reconstruction.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = super::files::read_json(path).map_err(|e| match e {
            Error::Parse { path, message } => Error::Config(format!("{path}: {message}")),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn truth_domain(&self) -> Result<Domain2D> {
        make_chest_phantom(&self.truth.shape)
    }

    pub fn phantom(&self, domain: &Domain2D) -> Phantom {
        match &self.truth.inclusions {
            Some(inc) => Phantom { background: self.truth.background, inclusions: inc.clone() },
            None => Phantom::chest(domain, self.truth.background),
        }
    }

    pub fn contact_impedances(&self) -> Vec<f64> {
        let t = &self.truth;
        (0..t.shape.n_electrodes).map(|l| t.contact_impedance * (1.0 + t.contact_spread * l as f64)).collect()
    }

    pub fn protocol(&self) -> Protocol {
        Protocol::adjacent(self.truth.shape.n_electrodes, self.truth.amplitude)
    }

    /// Known measure and electrode lengths of the physical domain. Measures
    /// other than the perimeter are taken from `truth`.
    pub fn targets(&self, truth: Option<&Domain2D>) -> Result<GeometricTargets> {
        let d_true = match (self.measure, truth) {
            (MeasureKind::Perimeter, _) => self.truth.shape.perimeter,
            (kind, Some(t)) => kind.measure(t.boundary()),
            (kind, None) => return Err(Error::Config(format!("measure {kind:?} needs the physical boundary"))),
        };
        Ok(GeometricTargets {
            d_true,
            electrode_lengths_true: vec![self.truth.shape.electrode_length; self.truth.shape.n_electrodes],
            beta: self.beta,
            measure: self.measure,
        })
    }

    /// Mesh, pixel grid and forward model on `domain`.
    pub fn inversion_model(&self, domain: &Domain2D, protocol: Protocol) -> Result<InversionModel> {
        let mesh = generate_mesh(domain, self.model.mesh_elements)?;
        let grid = make_pixel_grid(domain, self.model.pixels)?;
        InversionModel::new(mesh, grid, protocol)
    }
}

/// How the model domain is obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    /// Circle of the given radius centered at `center`.
    Circle { radius: f64, center: Point },
    /// A domain stored as JSON.
    File(std::path::PathBuf),
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// `circle:<r>`, `circle:<r>@<x>,<y>` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("model must be circle:<radius>[@x,y] or file:<path>, got {s:?}"));
        if let Some(rest) = s.strip_prefix("circle:") {
            let (r, c) = match rest.split_once('@') {
                Some((r, c)) => {
                    let (x, y) = c.split_once(',').ok_or_else(bad)?;
                    (r, Point::new(x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
                }
                None => (rest, Point::default()),
            };
            let radius: f64 = r.trim().parse().map_err(|_| bad())?;
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(bad());
            }
            Ok(ModelSpec::Circle { radius, center: c })
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(ModelSpec::File(p.into()))
        } else {
            Err(bad())
        }
    }
}

impl ModelSpec {
    /// Circle centered at the centroid of `truth`.
    pub fn circle_around(radius: f64, truth: &Domain2D) -> Self {
        ModelSpec::Circle { radius, center: centroid(truth.boundary()) }
    }

    /// Builds the model domain with the configured electrodes.
    pub fn domain(&self, cfg: &RunConfig) -> Result<Domain2D> {
        match self {
            ModelSpec::Circle { radius, center } => make_circle_domain(
                *radius,
                *center,
                cfg.truth.shape.n_electrodes,
                cfg.truth.shape.electrode_length,
                cfg.model.boundary_samples,
            ),
            ModelSpec::File(p) => super::files::read_json(p),
        }
    }
}

/// Electrodes 1, 2 and L (0-based 0, 1, L−1) stay in place.
pub fn fixed_electrodes(n_electrodes: usize) -> Vec<usize> {
    vec![0, 1, n_electrodes - 1]
}

/// Random ±1 displacement directions from `seed`.
pub fn displacement_signs(n_electrodes: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_electrodes).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// The physical domain with its electrodes displaced by `fraction` of their
/// length in random directions.
pub fn displaced_truth(truth: &Domain2D, fraction: f64, seed: u64) -> Result<Domain2D> {
    let l = truth.n_electrodes();
    displace_electrodes(truth, fraction, &displacement_signs(l, seed), &fixed_electrodes(l))
}

/// Parses `<fraction>:<seed>[,<seed>...]`.
pub fn parse_displacement(s: &str) -> Result<(f64, Vec<u64>)> {
    let bad = || Error::Config(format!("displacement must be <fraction>:<seed>[,<seed>...], got {s:?}"));
    let (f, seeds) = s.split_once(':').ok_or_else(bad)?;
    let fraction: f64 = f.trim().parse().map_err(|_| bad())?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(bad());
    }
    let seeds = seeds.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<Vec<u64>>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok((fraction, seeds))
}
