//! Penalty terms written as sums of squared residuals, so that the
//! Gauss-Newton model of each term is exact up to the residual curvature.

use super::config::RegWeights;
use crate::geometry::PixelGrid;

/// Position of each unknown in the full parameter vector
/// `[z (L), η (P), λ, θ (P)]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FullIndex {
    pub n_electrodes: usize,
    pub n_pixels: usize,
}

impl FullIndex {
    pub fn z(&self, l: usize) -> usize {
        l
    }
    pub fn eta(&self, p: usize) -> usize {
        self.n_electrodes + p
    }
    pub fn lambda(&self) -> usize {
        self.n_electrodes + self.n_pixels
    }
    pub fn theta(&self, p: usize) -> usize {
        self.n_electrodes + self.n_pixels + 1 + p
    }
    pub fn len(&self) -> usize {
        self.n_electrodes + 2 * self.n_pixels + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Residual values with sparse gradients in full-vector indices.
#[derive(Clone, Debug, Default)]
pub struct SparseResiduals {
    pub values: Vec<f64>,
    /// Gradient of residual `i` is `entries[offsets[i]..offsets[i + 1]]`.
    pub offsets: Vec<usize>,
    pub entries: Vec<(usize, f64)>,
}

impl SparseResiduals {
    fn new() -> Self {
        Self { values: Vec::new(), offsets: vec![0], entries: Vec::new() }
    }

    fn push(&mut self, value: f64, grad: &[(usize, f64)]) {
        self.values.push(value);
        self.entries.extend_from_slice(grad);
        self.offsets.push(self.entries.len());
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gradient(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Values of the individual penalty terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Penalties {
    pub w_z: f64,
    pub w_eta: f64,
    pub w_theta: f64,
    pub w_lambda: f64,
}

impl Penalties {
    pub fn total(&self) -> f64 {
        self.w_z + self.w_eta + self.w_theta + self.w_lambda
    }
}

/// Tikhonov penalties over electrodes (cyclic neighbors) and pixels
/// (4-neighbors). Neighbor sums run over every pixel and each of its
/// neighbors, so each unordered pair contributes twice.
#[derive(Clone, Debug)]
pub struct Regularizer {
    weights: RegWeights,
    index: FullIndex,
    pixel_pairs: Vec<(usize, usize)>,
}

impl Regularizer {
    pub fn new(weights: RegWeights, n_electrodes: usize, grid: &PixelGrid) -> Self {
        let mut pixel_pairs = Vec::new();
        for k in 0..grid.len() {
            for j in grid.neighbors(k) {
                pixel_pairs.push((k, j));
            }
        }
        Self { weights, index: FullIndex { n_electrodes, n_pixels: grid.len() }, pixel_pairs }
    }

    pub fn weights(&self) -> &RegWeights {
        &self.weights
    }

    pub fn index(&self) -> FullIndex {
        self.index
    }

    fn electrode_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let l = self.index.n_electrodes;
        (0..l).flat_map(move |i| [(i, (i + l - 1) % l), (i, (i + 1) % l)]).filter(|(a, b)| a != b)
    }

    /// All penalty residuals at the given parameters.
    pub fn residuals(&self, z: &[f64], eta: &[f64], lambda: f64, theta: &[f64]) -> SparseResiduals {
        let w = &self.weights;
        let ix = self.index;
        let mut r = SparseResiduals::new();
        if w.alpha0 > 0.0 {
            let s = w.alpha0.sqrt();
            for (l, v) in z.iter().enumerate() {
                r.push(s * v, &[(ix.z(l), s)]);
            }
        }
        if w.alpha1 > 0.0 {
            let s = w.alpha1.sqrt();
            for (a, b) in self.electrode_pairs() {
                r.push(s * (z[a] - z[b]), &[(ix.z(a), s), (ix.z(b), -s)]);
            }
        }
        if w.alpha2 > 0.0 {
            let s = w.alpha2.sqrt();
            for (p, v) in eta.iter().enumerate() {
                r.push(s * v, &[(ix.eta(p), s)]);
            }
        }
        if w.alpha3 > 0.0 {
            let s = w.alpha3.sqrt();
            for &(k, j) in &self.pixel_pairs {
                r.push(s * (eta[k] - eta[j]), &[(ix.eta(k), s), (ix.eta(j), -s)]);
            }
        }
        if w.alpha4 > 0.0 {
            let s = w.alpha4.sqrt();
            for (p, v) in theta.iter().enumerate() {
                r.push(s * v, &[(ix.theta(p), s)]);
            }
        }
        if w.alpha5 > 0.0 {
            // |e^{iθk} − e^{iθj}|² split into its real and imaginary parts.
            let s = w.alpha5.sqrt();
            for &(k, j) in &self.pixel_pairs {
                let (sk, ck) = theta[k].sin_cos();
                let (sj, cj) = theta[j].sin_cos();
                r.push(s * (ck - cj), &[(ix.theta(k), -s * sk), (ix.theta(j), s * sj)]);
                r.push(s * (sk - sj), &[(ix.theta(k), s * ck), (ix.theta(j), -s * cj)]);
            }
        }
        if w.alpha6 > 0.0 {
            let s = w.alpha6.sqrt();
            r.push(s * (lambda - 1.0), &[(ix.lambda(), s)]);
        }
        r
    }

    /// Penalty values term by term.
    pub fn penalties(&self, z: &[f64], eta: &[f64], lambda: f64, theta: &[f64]) -> Penalties {
        let w = &self.weights;
        let sq = |v: f64| v * v;
        let w_z = w.alpha0 * z.iter().map(|v| v * v).sum::<f64>()
            + w.alpha1 * self.electrode_pairs().map(|(a, b)| sq(z[a] - z[b])).sum::<f64>();
        let w_eta = w.alpha2 * eta.iter().map(|v| v * v).sum::<f64>()
            + w.alpha3 * self.pixel_pairs.iter().map(|&(k, j)| sq(eta[k] - eta[j])).sum::<f64>();
        let w_theta = w.alpha4 * theta.iter().map(|v| v * v).sum::<f64>()
            + w.alpha5 * self.pixel_pairs.iter().map(|&(k, j)| 2.0 - 2.0 * (theta[k] - theta[j]).cos()).sum::<f64>();
        let w_lambda = w.alpha6 * sq(lambda - 1.0);
        Penalties { w_z, w_eta, w_theta, w_lambda }
    }
}
