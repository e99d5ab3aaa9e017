//! Pixel-parameterized forward map and its adjoint Jacobian.

use faer::Mat;

use super::forward::{Factorization, ForwardModel};
use super::patterns::Protocol;
use super::tensor::{tensor_derivs_unchecked, AnisotropicField, SymTensor};
use crate::geometry::{Mesh, PixelGrid};
use crate::{Error, Result};

/// Readings and their derivatives with respect to every unknown.
///
/// Row `j * K + k` holds reading `k` of injection `j`.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub v: Vec<f64>,
    /// `∂V/∂z`, N×L.
    pub d_z: Mat<f64>,
    /// `∂V/∂η`, N×P.
    pub d_eta: Mat<f64>,
    /// `∂V/∂θ`, N×P.
    pub d_theta: Mat<f64>,
    /// `∂V/∂λ`, length N.
    pub d_lambda: Vec<f64>,
}

/// CEM forward map with conductivity given per pixel; every triangle takes
/// the value of the pixel containing its centroid.
#[derive(Clone, Debug)]
pub struct PixelModel {
    forward: ForwardModel,
    elem_pixel: Vec<usize>,
    n_pixels: usize,
    protocol: Protocol,
    current_rhs: Mat<f64>,
    measure_rhs: Mat<f64>,
}

impl PixelModel {
    pub fn new(mesh: Mesh, grid: &PixelGrid, protocol: Protocol) -> Result<Self> {
        let elem_pixel = grid.element_map(&mesh);
        let forward = ForwardModel::new(mesh, protocol.n_electrodes())?;
        if protocol.measurement.rows.iter().any(|r| r.len() != protocol.n_electrodes()) {
            return Err(Error::InvalidParameter("measurement operator width differs from L".into()));
        }
        let current_rhs = forward.current_rhs(&protocol.patterns)?;
        let measure_rhs = forward.electrode_rhs(&protocol.measurement.rows)?;
        Ok(Self { forward, elem_pixel, n_pixels: grid.len(), protocol, current_rhs, measure_rhs })
    }

    pub fn forward(&self) -> &ForwardModel {
        &self.forward
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_data(&self) -> usize {
        self.protocol.n_data()
    }

    pub fn n_electrodes(&self) -> usize {
        self.protocol.n_electrodes()
    }

    /// Pixel index of every element.
    pub fn element_pixels(&self) -> &[usize] {
        &self.elem_pixel
    }

    fn check_field(&self, field: &AnisotropicField) -> Result<()> {
        field.validate()?;
        if field.len() != self.n_pixels {
            return Err(Error::InvalidParameter(format!(
                "field has {} pixels, grid has {}",
                field.len(),
                self.n_pixels
            )));
        }
        Ok(())
    }

    /// Conductivity tensor on every mesh element.
    pub fn element_conductivity(&self, field: &AnisotropicField) -> Result<Vec<SymTensor>> {
        self.check_field(field)?;
        Ok(self.elem_pixel.iter().map(|&p| field.tensor(p)).collect())
    }

    fn factorize(&self, field: &AnisotropicField, z: &[f64]) -> Result<Factorization> {
        let sigma = self.element_conductivity(field)?;
        self.forward.factorize(&sigma, z)
    }

    fn readings(&self, x: &Mat<f64>) -> Vec<f64> {
        let n = self.forward.n_nodes();
        let rows = &self.protocol.measurement.rows;
        let mut v = Vec::with_capacity(self.n_data());
        for j in 0..x.ncols() {
            for r in rows {
                v.push(r.iter().enumerate().map(|(l, w)| w * x[(n + l, j)]).sum());
            }
        }
        v
    }

    /// Predicted readings.
    pub fn predict(&self, field: &AnisotropicField, z: &[f64]) -> Result<Vec<f64>> {
        let fac = self.factorize(field, z)?;
        Ok(self.readings(&fac.solve(&self.current_rhs)))
    }

    /// Readings and the full Jacobian by the adjoint method: one solve per
    /// current pattern and one per measurement row.
    pub fn linearize(&self, field: &AnisotropicField, z: &[f64]) -> Result<Linearization> {
        let fac = self.factorize(field, z)?;
        let x = fac.solve(&self.current_rhs);
        let y = fac.solve(&self.measure_rhs);
        let v = self.readings(&x);

        let (nj, nk) = (x.ncols(), y.ncols());
        let nd = nj * nk;
        let np = self.n_pixels;
        let n_el = self.forward.mesh().n_elements();

        // q[(p * nd + d) * 3 + c]: per-pixel integrals of the symmetric
        // gradient products of adjoint and forward states.
        let mut q = vec![0.0; np * nd * 3];
        let mut gx = vec![[0.0; 2]; nj];
        let mut gy = vec![[0.0; 2]; nk];
        let tris = self.forward.mesh().triangles();
        for t in 0..n_el {
            let g = self.forward.basis_gradients(t);
            let tri = tris[t];
            let grad = |m: &Mat<f64>, col: usize| {
                let mut out = [0.0; 2];
                for a in 0..3 {
                    let val = m[(tri[a], col)];
                    out[0] += val * g[a][0];
                    out[1] += val * g[a][1];
                }
                out
            };
            for (j, o) in gx.iter_mut().enumerate() {
                *o = grad(&x, j);
            }
            for (k, o) in gy.iter_mut().enumerate() {
                *o = grad(&y, k);
            }
            let area = self.forward.element_area(t);
            let base = self.elem_pixel[t] * nd * 3;
            for (j, a) in gx.iter().enumerate() {
                for (k, b) in gy.iter().enumerate() {
                    let o = base + (j * nk + k) * 3;
                    q[o] += area * a[0] * b[0];
                    q[o + 1] += area * (a[0] * b[1] + a[1] * b[0]);
                    q[o + 2] += area * a[1] * b[1];
                }
            }
        }

        let mut d_eta = Mat::<f64>::zeros(nd, np);
        let mut d_theta = Mat::<f64>::zeros(nd, np);
        let mut d_lambda = vec![0.0; nd];
        for p in 0..np {
            let (_, dg) = tensor_derivs_unchecked(field.lambda, field.eta[p], field.theta[p]);
            for d in 0..nd {
                let o = (p * nd + d) * 3;
                let pr = [q[o], q[o + 1], q[o + 2]];
                d_eta[(d, p)] = -dg.d_eta.contract(pr);
                d_theta[(d, p)] = -dg.d_theta.contract(pr);
                d_lambda[d] -= dg.d_lambda.contract(pr);
            }
        }

        let l_count = self.n_electrodes();
        let mut d_z = Mat::<f64>::zeros(nd, l_count);
        let xs: Vec<Vec<f64>> = (0..nj).map(|j| x.col(j).iter().copied().collect()).collect();
        let ys: Vec<Vec<f64>> = (0..nk).map(|k| y.col(k).iter().copied().collect()).collect();
        for (j, xj) in xs.iter().enumerate() {
            for (k, yk) in ys.iter().enumerate() {
                let gap = self.forward.electrode_gap_products(xj, yk);
                for l in 0..l_count {
                    d_z[(j * nk + k, l)] = gap[l] / (z[l] * z[l]);
                }
            }
        }
        Ok(Linearization { v, d_z, d_eta, d_theta, d_lambda })
    }
}
