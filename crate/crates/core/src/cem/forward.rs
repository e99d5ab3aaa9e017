//! Complete electrode model on piecewise-linear triangles.
//!
//! Unknowns are the nodal potentials `u` followed by the electrode potentials
//! `U`. The stiffness matrix is singular on constants; adding the rank-one
//! term `c·wwᵀ` with `w` the indicator of the `U` block removes the kernel
//! and, for balanced currents, yields the solution with `Σ U = 0`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use super::patterns::{CurrentPatterns, MeasurementOperator, Protocol};
use super::tensor::SymTensor;
use crate::geometry::Mesh;
use crate::{Error, Result};

#[derive(Clone, Debug)]
struct EdgeData {
    a: usize,
    b: usize,
    electrode: usize,
    len: f64,
    /// Slots of (a,a), (b,b), (a,b), (U,a), (U,b).
    slots: [usize; 5],
}

/// Mesh-dependent part of the CEM system: sparsity pattern, symbolic
/// factorization and element geometry. Reused for every conductivity.
#[derive(Clone, Debug)]
pub struct ForwardModel {
    mesh: Mesh,
    n_nodes: usize,
    n_electrodes: usize,
    pattern: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
    elem_slots: Vec<[usize; 6]>,
    elem_grad: Vec<[[f64; 2]; 3]>,
    elem_area: Vec<f64>,
    edges: Vec<EdgeData>,
    /// Slot of (n + l, n + m) for `l >= m`, stored at `l * L + m`.
    uu_slots: Vec<usize>,
    electrode_len: Vec<f64>,
}

/// Numeric factorization of the grounded CEM matrix.
pub struct Factorization {
    llt: Llt<usize, f64>,
}

impl Factorization {
    /// Solves for every column of `rhs`.
    pub fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        self.llt.solve(rhs)
    }
}

impl ForwardModel {
    /// Builds the sparsity pattern for a mesh with `n_electrodes` electrodes.
    pub fn new(mesh: Mesh, n_electrodes: usize) -> Result<Self> {
        if n_electrodes == 0 {
            return Err(Error::InvalidParameter("need at least one electrode".into()));
        }
        if mesh.n_electrodes() != n_electrodes {
            return Err(Error::InvalidParameter(format!(
                "mesh labels {} electrodes, expected {n_electrodes}",
                mesh.n_electrodes()
            )));
        }
        let n = mesh.n_nodes();
        let l_count = n_electrodes;
        let dim = n + l_count;

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let lower = |i: usize, j: usize| if i >= j { (j, i) } else { (i, j) };
        for t in mesh.triangles() {
            for &i in t {
                for &j in t {
                    if i >= j {
                        pairs.push(lower(i, j));
                    }
                }
            }
        }
        let mut edges = Vec::new();
        let mut electrode_len = vec![0.0; l_count];
        for e in mesh.boundary_edges() {
            let Some(l) = e.electrode else { continue };
            let [a, b] = e.edge;
            let len = mesh.nodes()[a].dist(mesh.nodes()[b]);
            electrode_len[l] += len;
            pairs.extend([lower(a, a), lower(b, b), lower(a, b), lower(n + l, a), lower(n + l, b)]);
            edges.push((a, b, l, len));
        }
        if electrode_len.iter().any(|&x| x <= 0.0) {
            return Err(Error::Meshing("electrode without mesh edges".into()));
        }
        for l in 0..l_count {
            for m in 0..=l {
                pairs.push((n + m, n + l));
            }
        }
        // (col, row) with row >= col, sorted column-major.
        pairs.sort_unstable();
        pairs.dedup();
        let mut col_ptr = vec![0usize; dim + 1];
        let mut row_idx = Vec::with_capacity(pairs.len());
        for &(c, r) in &pairs {
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..dim {
            col_ptr[c + 1] += col_ptr[c];
        }
        let slot = |i: usize, j: usize| -> usize {
            let (c, r) = lower(i, j);
            let range = col_ptr[c]..col_ptr[c + 1];
            let off = row_idx[range.clone()].binary_search(&r).expect("pattern entry");
            range.start + off
        };

        let mut elem_slots = Vec::with_capacity(mesh.n_elements());
        let mut elem_grad = Vec::with_capacity(mesh.n_elements());
        let mut elem_area = Vec::with_capacity(mesh.n_elements());
        for (ti, t) in mesh.triangles().iter().enumerate() {
            let [i, j, k] = *t;
            elem_slots.push([slot(i, i), slot(j, j), slot(k, k), slot(i, j), slot(i, k), slot(j, k)]);
            let p = [mesh.nodes()[i], mesh.nodes()[j], mesh.nodes()[k]];
            let area = mesh.element_area(ti);
            let mut g = [[0.0; 2]; 3];
            for q in 0..3 {
                let (a, b) = (p[(q + 1) % 3], p[(q + 2) % 3]);
                g[q] = [(a.y - b.y) / (2.0 * area), (b.x - a.x) / (2.0 * area)];
            }
            elem_grad.push(g);
            elem_area.push(area);
        }
        let edges = edges
            .into_iter()
            .map(|(a, b, l, len)| EdgeData {
                a,
                b,
                electrode: l,
                len,
                slots: [slot(a, a), slot(b, b), slot(a, b), slot(n + l, a), slot(n + l, b)],
            })
            .collect();
        let mut uu_slots = vec![usize::MAX; l_count * l_count];
        for l in 0..l_count {
            for m in 0..=l {
                uu_slots[l * l_count + m] = slot(n + l, n + m);
            }
        }

        let pattern = SymbolicSparseColMat::new_checked(dim, dim, col_ptr, None, row_idx);
        let symbolic = SymbolicLlt::try_new(pattern.as_ref(), Side::Lower)
            .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
        Ok(Self {
            mesh,
            n_nodes: n,
            n_electrodes: l_count,
            pattern,
            symbolic,
            elem_slots,
            elem_grad,
            elem_area,
            edges,
            uu_slots,
            electrode_len,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_electrodes(&self) -> usize {
        self.n_electrodes
    }

    /// Size of the linear system.
    pub fn dim(&self) -> usize {
        self.n_nodes + self.n_electrodes
    }

    /// Electrode lengths as seen by the mesh.
    pub fn electrode_lengths(&self) -> &[f64] {
        &self.electrode_len
    }

    pub fn element_area(&self, t: usize) -> f64 {
        self.elem_area[t]
    }

    /// Gradients of the three barycentric basis functions of element `t`.
    pub fn basis_gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.elem_grad[t]
    }

    fn check_inputs(&self, sigma: &[SymTensor], z: &[f64]) -> Result<()> {
        if sigma.len() != self.mesh.n_elements() {
            return Err(Error::InvalidParameter(format!(
                "conductivity has {} entries, mesh has {} elements",
                sigma.len(),
                self.mesh.n_elements()
            )));
        }
        if let Some(t) = sigma.iter().position(|s| !s.is_positive_definite()) {
            return Err(Error::InvalidParameter(format!("conductivity of element {t} is not positive definite")));
        }
        if z.len() != self.n_electrodes {
            return Err(Error::InvalidParameter("contact impedance length mismatch".into()));
        }
        if z.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("contact impedances must be positive".into()));
        }
        Ok(())
    }

    /// Lower-triangle values of the stiffness matrix; `ground` adds the
    /// rank-one term on the electrode block.
    fn values(&self, sigma: &[SymTensor], z: &[f64], ground: bool) -> Vec<f64> {
        let mut v = vec![0.0; self.pattern.row_idx().len()];
        for (t, s) in sigma.iter().enumerate() {
            let g = &self.elem_grad[t];
            let a = self.elem_area[t];
            let k = |i: usize, j: usize| a * s.bilinear(g[i], g[j]);
            let sl = &self.elem_slots[t];
            v[sl[0]] += k(0, 0);
            v[sl[1]] += k(1, 1);
            v[sl[2]] += k(2, 2);
            v[sl[3]] += k(0, 1);
            v[sl[4]] += k(0, 2);
            v[sl[5]] += k(1, 2);
        }
        let l_count = self.n_electrodes;
        for e in &self.edges {
            let w = 1.0 / z[e.electrode];
            let h = e.len;
            v[e.slots[0]] += w * h / 3.0;
            v[e.slots[1]] += w * h / 3.0;
            v[e.slots[2]] += w * h / 6.0;
            v[e.slots[3]] -= w * h / 2.0;
            v[e.slots[4]] -= w * h / 2.0;
        }
        for l in 0..l_count {
            v[self.uu_slots[l * l_count + l]] += self.electrode_len[l] / z[l];
        }
        if ground {
            let c = self.ground_constant(z);
            for l in 0..l_count {
                for m in 0..=l {
                    v[self.uu_slots[l * l_count + m]] += c;
                }
            }
        }
        v
    }

    fn ground_constant(&self, z: &[f64]) -> f64 {
        self.electrode_len.iter().zip(z).map(|(e, z)| e / z).sum::<f64>() / z.len() as f64
    }

    /// Factorizes the grounded system for the given element conductivities.
    pub fn factorize(&self, sigma: &[SymTensor], z: &[f64]) -> Result<Factorization> {
        self.check_inputs(sigma, z)?;
        let vals = self.values(sigma, z, true);
        let a = SparseColMat::new(self.pattern.clone(), vals);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), a.as_ref(), Side::Lower)
            .map_err(|e| Error::Singular(format!("CEM matrix factorization failed: {e:?}")))?;
        Ok(Factorization { llt })
    }

    /// Right-hand sides `[0; I_j]` for every pattern.
    pub fn current_rhs(&self, patterns: &CurrentPatterns) -> Result<Mat<f64>> {
        self.electrode_rhs(&patterns.currents)
    }

    /// Right-hand sides with `rows[j]` in the electrode block.
    pub fn electrode_rhs(&self, rows: &[Vec<f64>]) -> Result<Mat<f64>> {
        let n = self.n_nodes;
        if rows.iter().any(|r| r.len() != self.n_electrodes) {
            return Err(Error::InvalidParameter("electrode vector length mismatch".into()));
        }
        Ok(Mat::from_fn(self.dim(), rows.len(), |i, j| if i >= n { rows[j][i - n] } else { 0.0 }))
    }

    /// Multiplies by the stiffness matrix without the grounding term.
    pub fn apply_ungrounded(&self, sigma: &[SymTensor], z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(sigma, z)?;
        if x.len() != self.dim() {
            return Err(Error::InvalidParameter("vector length mismatch".into()));
        }
        let vals = self.values(sigma, z, false);
        let mut y = vec![0.0; self.dim()];
        let cp = self.pattern.col_ptr();
        let ri = self.pattern.row_idx();
        for c in 0..self.dim() {
            for p in cp[c]..cp[c + 1] {
                let r = ri[p];
                y[r] += vals[p] * x[c];
                if r != c {
                    y[c] += vals[p] * x[r];
                }
            }
        }
        Ok(y)
    }

    /// Gradient of the nodal part of `x` on every element.
    pub fn element_gradients(&self, x: &[f64]) -> Vec<[f64; 2]> {
        self.mesh
            .triangles()
            .iter()
            .zip(&self.elem_grad)
            .map(|(t, g)| {
                let mut out = [0.0; 2];
                for q in 0..3 {
                    out[0] += x[t[q]] * g[q][0];
                    out[1] += x[t[q]] * g[q][1];
                }
                out
            })
            .collect()
    }

    /// `∫_{e_l} (y_u - Y_l)(x_u - X_l) ds` for every electrode.
    pub fn electrode_gap_products(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n_nodes;
        let mut out = vec![0.0; self.n_electrodes];
        for e in &self.edges {
            let (xu, yu) = (x[n + e.electrode], y[n + e.electrode]);
            let (xa, xb) = (x[e.a] - xu, x[e.b] - xu);
            let (ya, yb) = (y[e.a] - yu, y[e.b] - yu);
            out[e.electrode] += e.len / 6.0 * (2.0 * xa * ya + xa * yb + xb * ya + 2.0 * xb * yb);
        }
        out
    }

    /// Net current through each electrode, `(|e_l| U_l - ∫_{e_l} u ds) / z_l`.
    pub fn electrode_currents(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.n_nodes;
        let mut integral = vec![0.0; self.n_electrodes];
        for e in &self.edges {
            integral[e.electrode] += 0.5 * e.len * (x[e.a] + x[e.b]);
        }
        (0..self.n_electrodes).map(|l| (self.electrode_len[l] * x[n + l] - integral[l]) / z[l]).collect()
    }

    /// Solves the CEM for every pattern of the protocol.
    pub fn solve(&self, sigma: &[SymTensor], z: &[f64], patterns: &CurrentPatterns) -> Result<CemSolution> {
        if patterns.n_electrodes() != self.n_electrodes {
            return Err(Error::InvalidParameter("pattern length differs from L".into()));
        }
        let fac = self.factorize(sigma, z)?;
        let states = fac.solve(&self.current_rhs(patterns)?);
        Ok(CemSolution { states, n_nodes: self.n_nodes, n_electrodes: self.n_electrodes })
    }

    /// Balanced resistance matrix `Π E Ã⁻¹ Eᵀ Π`, with `Π` the projection
    /// onto zero-sum electrode vectors.
    pub fn resistance_matrix(&self, sigma: &[SymTensor], z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let l_count = self.n_electrodes;
        let fac = self.factorize(sigma, z)?;
        let rows: Vec<Vec<f64>> = (0..l_count)
            .map(|l| (0..l_count).map(|m| if m == l { 1.0 } else { 0.0 } - 1.0 / l_count as f64).collect())
            .collect();
        let sol = fac.solve(&self.electrode_rhs(&rows)?);
        let n = self.n_nodes;
        let mut r = vec![vec![0.0; l_count]; l_count];
        for l in 0..l_count {
            let mean = (0..l_count).map(|m| sol[(n + m, l)]).sum::<f64>() / l_count as f64;
            for m in 0..l_count {
                r[m][l] = sol[(n + m, l)] - mean;
            }
        }
        Ok(r)
    }
}

/// Solution states, one column `[u; U]` per current pattern.
#[derive(Clone, Debug)]
pub struct CemSolution {
    pub states: Mat<f64>,
    n_nodes: usize,
    n_electrodes: usize,
}

impl CemSolution {
    pub fn n_patterns(&self) -> usize {
        self.states.ncols()
    }

    /// Full state vector of pattern `j`.
    pub fn state(&self, j: usize) -> Vec<f64> {
        self.states.col(j).iter().copied().collect()
    }

    /// Electrode potentials of pattern `j`.
    pub fn electrode_potentials(&self, j: usize) -> Vec<f64> {
        (0..self.n_electrodes).map(|l| self.states[(self.n_nodes + l, j)]).collect()
    }

    /// Readings stacked injection-major.
    pub fn measurements(&self, op: &MeasurementOperator) -> Vec<f64> {
        (0..self.n_patterns()).flat_map(|j| op.apply(&self.electrode_potentials(j))).collect()
    }
}

/// One-shot CEM solve returning the electrode potentials (one row per
/// pattern) and the stacked readings.
pub fn solve_cem(
    mesh: &Mesh,
    sigma: &[SymTensor],
    z: &[f64],
    protocol: &Protocol,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let model = ForwardModel::new(mesh.clone(), protocol.n_electrodes())?;
    let sol = model.solve(sigma, z, &protocol.patterns)?;
    let u = (0..sol.n_patterns()).map(|j| sol.electrode_potentials(j)).collect();
    Ok((u, sol.measurements(&protocol.measurement)))
}
