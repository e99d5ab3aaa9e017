//! Synthetic measurements from piecewise-constant phantoms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::forward::ForwardModel;
use super::patterns::{CurrentPatterns, MeasurementOperator, Protocol};
use super::tensor::SymTensor;
use crate::geometry::{Domain2D, Mesh, Point};
use crate::{Error, Result};

/// Ellipse with semi-axes `(a, b)` rotated by `angle`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, p: Point) -> bool {
        let d = p - self.center;
        let (s, c) = self.angle.sin_cos();
        let u = c * d.x + s * d.y;
        let v = -s * d.x + c * d.y;
        (u / self.a).powi(2) + (v / self.b).powi(2) < 1.0
    }
}

/// Inclusion of constant conductivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub shape: Ellipse,
    pub conductivity: f64,
}

/// Isotropic piecewise-constant conductivity; later inclusions cover earlier
/// ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
}

impl Phantom {
    pub fn homogeneous(background: f64) -> Self {
        Self { background, inclusions: Vec::new() }
    }

    /// Chest-like phantom: two lungs at `background / 1.55` and a heart at
    /// `2 · background`, placed relative to the domain centroid and its
    /// equivalent radius.
    pub fn chest(domain: &Domain2D, background: f64) -> Self {
        let c = crate::geometry::polygon::centroid(domain.boundary());
        let r0 = (domain.area() / std::f64::consts::PI).sqrt();
        let at = |x: f64, y: f64| Point::new(c.x + x * r0, c.y + y * r0);
        let lung = |x: f64| Inclusion {
            shape: Ellipse { center: at(x, 0.1), a: 0.24 * r0, b: 0.42 * r0, angle: 0.0 },
            conductivity: background / 1.55,
        };
        let heart = Inclusion {
            shape: Ellipse { center: at(-0.08, -0.38), a: 0.2 * r0, b: 0.2 * r0, angle: 0.0 },
            conductivity: 2.0 * background,
        };
        Self { background, inclusions: vec![lung(-0.45), lung(0.45), heart] }
    }

    pub fn value_at(&self, p: Point) -> f64 {
        self.inclusions.iter().rev().find(|i| i.shape.contains(p)).map_or(self.background, |i| i.conductivity)
    }

    /// Isotropic tensor on every mesh element, sampled at the centroid.
    pub fn on_mesh(&self, mesh: &Mesh) -> Vec<SymTensor> {
        (0..mesh.n_elements()).map(|t| SymTensor::isotropic(self.value_at(mesh.centroid(t)))).collect()
    }
}

/// Kind of measurement operator as stored on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasKind {
    AdjacentDifference,
    FullPotential,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasOpSpec {
    pub kind: MeasKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

/// Stacked electrode readings with the protocol that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSet {
    #[serde(rename = "L")]
    pub n_electrodes: usize,
    #[serde(rename = "J")]
    pub n_patterns: usize,
    #[serde(rename = "K")]
    pub n_readings: usize,
    #[serde(rename = "amplitude_mA")]
    pub amplitude_ma: f64,
    pub patterns: Vec<Vec<f64>>,
    pub meas_op: MeasOpSpec,
    pub voltages: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl MeasurementSet {
    /// Wraps readings taken with the adjacent protocol.
    pub fn adjacent(n_electrodes: usize, amplitude: f64, voltages: Vec<f64>, noise_sigma: f64, seed: u64) -> Self {
        let p = CurrentPatterns::adjacent(n_electrodes, amplitude);
        Self {
            n_electrodes,
            n_patterns: n_electrodes,
            n_readings: n_electrodes,
            amplitude_ma: amplitude,
            patterns: p.currents,
            meas_op: MeasOpSpec { kind: MeasKind::AdjacentDifference, matrix: None },
            voltages,
            noise_sigma,
            seed,
        }
    }

    /// Rebuilds the protocol and checks the declared sizes.
    pub fn protocol(&self) -> Result<Protocol> {
        let l = self.n_electrodes;
        let patterns = CurrentPatterns::new(self.patterns.clone(), l)?;
        let measurement = match (&self.meas_op.kind, &self.meas_op.matrix) {
            (MeasKind::AdjacentDifference, _) => MeasurementOperator::adjacent_difference(l),
            (MeasKind::FullPotential, _) => MeasurementOperator::full_potential(l),
            (MeasKind::Custom, Some(m)) => MeasurementOperator::new(m.clone(), l)?,
            (MeasKind::Custom, None) => return Err(Error::InvalidParameter("custom operator without matrix".into())),
        };
        if patterns.len() != self.n_patterns || measurement.len() != self.n_readings {
            return Err(Error::InvalidParameter("declared J or K does not match data".into()));
        }
        if self.voltages.len() != self.n_patterns * self.n_readings {
            return Err(Error::InvalidParameter(format!(
                "expected {} voltages, found {}",
                self.n_patterns * self.n_readings,
                self.voltages.len()
            )));
        }
        Ok(Protocol { patterns, measurement })
    }
}

/// Adds i.i.d. Gaussian noise with standard deviation
/// `noise_sigma · max|V|` from a seeded generator.
pub fn add_noise(clean: &[f64], noise_sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter("noise level must be non-negative".into()));
    }
    if noise_sigma == 0.0 {
        return Ok(clean.to_vec());
    }
    let scale = clean.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let normal = Normal::new(0.0, noise_sigma * scale)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(clean.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Simulates noisy readings of the element conductivity `sigma` on a
/// (fine) mesh. Returns the noiseless readings as well.
pub fn simulate(
    mesh: &Mesh,
    sigma: &[SymTensor],
    z: &[f64],
    protocol: &Protocol,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let model = ForwardModel::new(mesh.clone(), protocol.n_electrodes())?;
    let sol = model.solve(sigma, z, &protocol.patterns)?;
    let clean = sol.measurements(&protocol.measurement);
    let noisy = add_noise(&clean, noise_sigma, seed)?;
    Ok((clean, noisy))
}
