//! Gauss-Newton with logarithmic positivity barriers and a backtracking
//! line search.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt as SparseLlt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::config::{Flags, HistoryEntry, StageConfig};
use super::regularization::SparseResiduals;
use crate::{Error, Result};

/// Residuals `r(x)` of a nonlinear least-squares problem, split into a
/// dense data block and sparse penalty rows.
#[derive(Clone, Debug)]
pub struct Residuals {
    pub data: Vec<f64>,
    pub penalty: SparseResiduals,
}

impl Residuals {
    pub fn misfit(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn objective(&self) -> f64 {
        self.misfit() + self.penalty.sum_of_squares()
    }
}

/// A problem the engine can minimize. Penalty gradients are in parameter
/// indices; the data Jacobian is dense, `n_data × n_params`.
pub trait LeastSquares {
    fn n_params(&self) -> usize;

    /// Parameters that must stay positive and carry a barrier.
    fn positive(&self) -> Vec<bool>;

    fn residuals(&self, x: &[f64]) -> Result<Residuals>;

    fn linearize(&self, x: &[f64]) -> Result<(Residuals, Mat<f64>)>;

    /// Largest change of each parameter in one step; longer steps are
    /// shortened as a whole.
    fn max_step(&self) -> Vec<f64> {
        vec![f64::INFINITY; self.n_params()]
    }
}

/// Result of [`gauss_newton`].
#[derive(Clone, Debug)]
pub struct GnOutcome {
    pub x: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    pub flags: Flags,
    /// Barrier weight of the last round.
    pub barrier_weight: f64,
    /// Accepted steps over all rounds.
    pub steps: usize,
}

/// Problems with more parameters than this are solved through the
/// low-rank update instead of a dense Cholesky factorization.
const DENSE_LIMIT: usize = 800;

fn barrier_sum(x: &[f64], positive: &[bool]) -> f64 {
    x.iter().zip(positive).filter(|(_, &p)| p).map(|(v, _)| v.ln()).sum()
}

fn feasible(x: &[f64], positive: &[bool]) -> bool {
    x.iter().zip(positive).all(|(v, &p)| v.is_finite() && (!p || *v > 0.0))
}

/// Minimizes `‖r_data‖² + ‖r_penalty‖² − (w/m) Σ log x_i` over rounds of
/// decreasing `w`, where `m` counts the barrier parameters. The first round uses `initial_weight`, or
/// `cfg.barrier_initial` times the initial misfit when it is `None`.
pub fn gauss_newton<P: LeastSquares>(
    problem: &P,
    x0: &[f64],
    cfg: &StageConfig,
    initial_weight: Option<f64>,
) -> Result<GnOutcome> {
    cfg.validate()?;
    let n = problem.n_params();
    let positive = problem.positive();
    if x0.len() != n || positive.len() != n {
        return Err(Error::InvalidParameter("parameter vector has the wrong length".into()));
    }
    if !feasible(x0, &positive) {
        return Err(Error::InvalidParameter("initial point is not strictly feasible".into()));
    }
    let n_barrier = positive.iter().filter(|&&p| p).count();
    let has_barrier = n_barrier > 0;

    let mut x = x0.to_vec();
    let mut res = problem.residuals(&x)?;
    let mut w = match initial_weight {
        Some(w) => w,
        None => cfg.barrier_initial * res.misfit(),
    };
    if !has_barrier {
        w = 0.0;
    }
    let mut flags = Flags::default();
    let mut history = Vec::new();
    let mut steps = 0;
    let max_step = problem.max_step();
    let per_term = |w: f64| w / n_barrier.max(1) as f64;
    let eval = |res: &Residuals, x: &[f64], w: f64| res.objective() - per_term(w) * barrier_sum(x, &positive);

    for round in 0..cfg.barrier_rounds {
        if round > 0 {
            w *= cfg.barrier_decay;
        }
        let mut phi = eval(&res, &x, w);
        history.push(HistoryEntry { round, objective: phi, misfit: res.misfit(), barrier_weight: w });
        let mut converged = false;
        for _ in 0..cfg.max_iters {
            let (lin_res, jac) = problem.linearize(&x)?;
            let (grad, delta) = newton_step(&lin_res, &jac, &x, &positive, per_term(w), &mut flags)?;
            let slope: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum();
            if !(slope < 0.0) || -slope <= 1e-15 * phi.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            let mut t: f64 = 1.0;
            for (di, cap) in delta.iter().zip(&max_step) {
                if di.abs() > *cap {
                    t = t.min(cap / di.abs());
                }
            }
            for ((xi, di), &p) in x.iter().zip(&delta).zip(&positive) {
                if p && *di < 0.0 {
                    t = t.min(cfg.boundary_fraction * xi / -di);
                }
            }
            let mut accepted = None;
            for _ in 0..=cfg.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                if feasible(&trial, &positive) {
                    if let Ok(r) = problem.residuals(&trial) {
                        let phi_trial = eval(&r, &trial, w);
                        if phi_trial <= phi + cfg.armijo * t * slope {
                            accepted = Some((trial, r, phi_trial));
                            break;
                        }
                    }
                }
                t *= cfg.backtrack;
            }
            let Some((trial, r, phi_trial)) = accepted else {
                flags.stalled = true;
                log::debug!("line search failed in round {round}");
                converged = true;
                break;
            };
            let decrease = (phi - phi_trial) / phi.abs().max(f64::MIN_POSITIVE);
            x = trial;
            res = r;
            phi = phi_trial;
            steps += 1;
            history.push(HistoryEntry { round, objective: phi, misfit: res.misfit(), barrier_weight: w });
            if decrease < cfg.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            flags.max_iters = true;
        }
        if !has_barrier {
            break;
        }
    }
    Ok(GnOutcome { x, history, flags, barrier_weight: w, steps })
}

/// Gradient of the barrier objective and the Gauss-Newton step.
fn newton_step(
    res: &Residuals,
    jac: &Mat<f64>,
    x: &[f64],
    positive: &[bool],
    w: f64,
    flags: &mut Flags,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if jac.nrows() != res.data.len() || jac.ncols() != n {
        return Err(Error::InvalidParameter("Jacobian has the wrong shape".into()));
    }
    let mut grad = vec![0.0; n];
    for (j, g) in grad.iter_mut().enumerate() {
        *g = 2.0 * jac.col(j).iter().zip(&res.data).map(|(a, b)| a * b).sum::<f64>();
    }
    let pen = &res.penalty;
    for i in 0..pen.len() {
        for &(j, v) in pen.gradient(i) {
            grad[j] += 2.0 * pen.values[i] * v;
        }
    }
    // Sparse part of the Hessian: penalties and barrier.
    let mut sparse: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..pen.len() {
        let g = pen.gradient(i);
        for &(a, va) in g {
            for &(b, vb) in g {
                if a >= b {
                    *sparse.entry((a, b)).or_insert(0.0) += 2.0 * va * vb;
                }
            }
        }
    }
    for j in 0..n {
        if positive[j] && w > 0.0 {
            grad[j] -= w / x[j];
            *sparse.entry((j, j)).or_insert(0.0) += w / (x[j] * x[j]);
        }
    }
    let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
    let delta = if n <= DENSE_LIMIT {
        dense_solve(jac, &sparse, &rhs, flags)?
    } else {
        LowRankSolver::new(jac, &sparse, flags)?.solve(&rhs)
    };
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("Gauss-Newton step is not finite".into()));
    }
    Ok((grad, delta))
}

fn dense_solve(
    jac: &Mat<f64>,
    sparse: &BTreeMap<(usize, usize), f64>,
    rhs: &[f64],
    flags: &mut Flags,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut h = jac.transpose() * jac * 2.0;
    for (&(a, b), &v) in sparse {
        h[(a, b)] += v;
        if a != b {
            h[(b, a)] += v;
        }
    }
    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut mu = 0.0;
    for _ in 0..16 {
        let mut hm = h.clone();
        for i in 0..n {
            hm[(i, i)] += mu;
        }
        if let Ok(llt) = hm.llt(Side::Lower) {
            let x = llt.solve(&b);
            let out: Vec<f64> = x.col(0).iter().copied().collect();
            if out.iter().all(|v| v.is_finite()) {
                if mu > 0.0 {
                    flags.damped = true;
                }
                return Ok(out);
            }
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 100.0 };
    }
    Err(Error::Singular("normal equations could not be factorized".into()))
}

/// Solves `(S + 2JᵀJ) δ = b` for sparse `S` with preconditioned conjugate
/// gradients, using the exact inverse of `S + μI + 2JᵀJ` (Woodbury) as the
/// preconditioner. `μ` is zero whenever `S` admits a Cholesky factor.
struct LowRankSolver<'a> {
    jac: &'a Mat<f64>,
    s: SparseColMat<usize, f64>,
    s_llt: SparseLlt<usize, f64>,
    /// `S_μ⁻¹ Jᵀ`, n×N.
    z: Mat<f64>,
    /// Cholesky factor of `I/2 + J S_μ⁻¹ Jᵀ`.
    small: faer::linalg::solvers::Llt<f64>,
    exact: bool,
}

impl<'a> LowRankSolver<'a> {
    fn new(jac: &'a Mat<f64>, sparse: &BTreeMap<(usize, usize), f64>, flags: &mut Flags) -> Result<Self> {
        let n = jac.ncols();
        let nd = jac.nrows();
        let mut diag = vec![0.0; n];
        for (&(a, b), &v) in sparse {
            if a == b {
                diag[a] = v;
            }
        }
        let jt_diag: Vec<f64> = (0..n).map(|j| 2.0 * jac.col(j).iter().map(|v| v * v).sum::<f64>()).collect();
        let scale = diag.iter().zip(&jt_diag).map(|(a, b)| a + b).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let build = |mu: f64| -> Result<SparseColMat<usize, f64>> {
            let mut trip: Vec<Triplet<usize, usize, f64>> =
                sparse.iter().map(|(&(a, b), &v)| Triplet::new(a, b, v)).collect();
            // Keeps every diagonal entry structurally present.
            trip.extend((0..n).map(|j| Triplet::new(j, j, mu)));
            SparseColMat::try_new_from_triplets(n, n, &trip)
                .map_err(|e| Error::Singular(format!("sparse Hessian assembly failed: {e:?}")))
        };
        let min_rel = diag.iter().map(|d| d / scale).fold(f64::INFINITY, f64::min);
        let mut mu = if min_rel > 1e-12 { 0.0 } else { 1e-8 * scale };
        for _ in 0..12 {
            let s = build(mu)?;
            let sym = SymbolicLlt::try_new(s.symbolic(), Side::Lower)
                .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
            let Ok(s_llt) = SparseLlt::try_new_with_symbolic(sym, s.as_ref(), Side::Lower) else {
                mu = if mu == 0.0 { 1e-8 * scale } else { mu * 100.0 };
                continue;
            };
            let jt = jac.transpose().to_owned();
            let z = s_llt.solve(&jt);
            let mut m = jac * &z;
            for i in 0..nd {
                m[(i, i)] += 0.5;
            }
            let Ok(small) = m.llt(Side::Lower) else {
                mu = if mu == 0.0 { 1e-8 * scale } else { mu * 100.0 };
                continue;
            };
            let s = if mu == 0.0 { s } else { build(0.0)? };
            return Ok(Self { jac, s, s_llt, z, small, exact: mu == 0.0 });
        }
        flags.damped = true;
        Err(Error::Singular("normal equations could not be factorized".into()))
    }

    fn precondition(&self, r: &Mat<f64>) -> Mat<f64> {
        let sr = self.s_llt.solve(r);
        let js = self.jac * &sr;
        let c = self.small.solve(&js);
        sr - &self.z * c
    }

    fn apply(&self, v: &Mat<f64>) -> Mat<f64> {
        let jv = self.jac * v;
        let mut out = self.jac.transpose() * jv * 2.0;
        // Lower triangle of S holds every entry once.
        let s = self.s.as_ref();
        for j in 0..s.ncols() {
            let rows = s.row_idx_of_col_raw(j);
            let vals = s.val_of_col(j);
            for (&i, &a) in rows.iter().zip(vals) {
                out[(i, 0)] += a * v[(j, 0)];
                if i != j {
                    out[(j, 0)] += a * v[(i, 0)];
                }
            }
        }
        out
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let mut x = self.precondition(&b);
        let bnorm = b.norm_l2().max(f64::MIN_POSITIVE);
        let max_iter = if self.exact { 3 } else { 200 };
        let mut r = &b - self.apply(&x);
        if r.norm_l2() <= 1e-12 * bnorm {
            return x.col(0).iter().copied().collect();
        }
        let mut zr = self.precondition(&r);
        let mut p = zr.clone();
        let mut rz = dot(&r, &zr);
        for _ in 0..max_iter {
            let hp = self.apply(&p);
            let php = dot(&p, &hp);
            if !(php > 0.0) {
                break;
            }
            let alpha = rz / php;
            x += &p * alpha;
            r -= &hp * alpha;
            if r.norm_l2() <= 1e-12 * bnorm {
                break;
            }
            zr = self.precondition(&r);
            let rz_new = dot(&r, &zr);
            let beta = rz_new / rz;
            rz = rz_new;
            p = &zr + &p * beta;
        }
        x.col(0).iter().copied().collect()
    }
}

fn dot(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.col(0).iter().zip(b.col(0).iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    fn system(n: usize, nd: usize, singular_tail: bool) -> (Mat<f64>, BTreeMap<(usize, usize), f64>, Vec<f64>) {
        let vals = pseudo_random(7, n * nd);
        let jac = Mat::from_fn(nd, n, |i, j| vals[i * n + j]);
        let mut s = BTreeMap::new();
        for j in 0..n {
            let d = if singular_tail && j >= n / 2 { 0.0 } else { 1.0 + (j % 5) as f64 };
            s.insert((j, j), d + 0.5);
            if j > 0 {
                s.insert((j, j - 1), -0.25);
            }
        }
        if singular_tail {
            // A Laplacian-like block with a constant null vector.
            for j in n / 2..n {
                s.insert((j, j), if j == n / 2 || j == n - 1 { 1.0 } else { 2.0 });
                if j > n / 2 {
                    s.insert((j, j - 1), -1.0);
                }
            }
            s.insert((n / 2, n / 2 - 1), 0.0);
        }
        (jac, s, pseudo_random(11, n))
    }

    #[test]
    fn low_rank_and_dense_solves_agree() {
        for singular in [false, true] {
            let (jac, s, b) = system(120, 30, singular);
            let mut flags = Flags::default();
            let dense = dense_solve(&jac, &s, &b, &mut flags).unwrap();
            let lr = LowRankSolver::new(&jac, &s, &mut flags).unwrap().solve(&b);
            let err: f64 = dense.iter().zip(&lr).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = dense.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * norm, "singular={singular}: {}", err / norm);
        }
    }
}
