//! Neumann-series solution of `∂̄F = μ ∂F`, `F = z + h`, on a periodic grid.
//!
//! The Cauchy kernel `1/(πz)` is truncated at `|z| = ρ` with `ρ` equal to
//! the cell half-width before periodization. For `μ` supported in the disc
//! of radius `s/2`, every distance that matters is below `ρ`, so the
//! periodic convolutions agree with the whole-plane operators inside that
//! disc.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::coefficient::{node, CoefficientGrid};
use crate::geometry::Point;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Two-dimensional FFT on `n×n` row-major data.
struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn transpose(&self, a: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            for i in j + 1..n {
                a.swap(j * n + i, i * n + j);
            }
        }
    }

    fn run(&self, a: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        fft.process(a);
        self.transpose(a);
        fft.process(a);
        self.transpose(a);
        if inverse {
            let scale = 1.0 / (self.n * self.n) as f64;
            a.iter_mut().for_each(|v| *v *= scale);
        }
    }

    /// Applies a Fourier multiplier.
    fn apply(&self, data: &[Complex64], symbol: &[Complex64]) -> Vec<Complex64> {
        let mut a = data.to_vec();
        self.run(&mut a, false);
        a.iter_mut().zip(symbol).for_each(|(v, s)| *v *= s);
        self.run(&mut a, true);
        a
    }
}

/// Angular wavenumber of FFT bin `f` on a grid of `n` points with period `len`.
fn wavenumber(f: usize, n: usize, len: f64) -> f64 {
    let signed = if f < n / 2 { f as f64 } else { f as f64 - n as f64 };
    2.0 * std::f64::consts::PI * signed / len
}

/// Symbols of the truncated solid Cauchy transform `P` (inverse of `∂̄`) and
/// the Beurling transform `S = ∂P`.
fn symbols(n: usize, delta: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let len = n as f64 * delta;
    let rho = 0.5 * len;
    let mut p = vec![ZERO; n * n];
    let mut s = vec![ZERO; n * n];
    for fy in 0..n {
        for fx in 0..n {
            if fx == n / 2 || fy == n / 2 {
                continue;
            }
            let kappa = Complex64::new(wavenumber(fx, n, len), wavenumber(fy, n, len));
            let k = kappa.norm();
            if k == 0.0 {
                continue;
            }
            let trunc = 1.0 - libm::j0(rho * k);
            p[fy * n + fx] = Complex64::new(0.0, -2.0) / kappa * trunc;
            s[fy * n + fx] = kappa.conj() / kappa * trunc;
        }
    }
    (p, s)
}

/// Gaussian smoothing with standard deviation `width`.
pub(crate) fn gaussian_smooth(data: &[Complex64], n: usize, delta: f64, width: f64) -> Vec<Complex64> {
    let len = n as f64 * delta;
    let mut symbol = vec![ZERO; n * n];
    for fy in 0..n {
        for fx in 0..n {
            let k2 = wavenumber(fx, n, len).powi(2) + wavenumber(fy, n, len).powi(2);
            symbol[fy * n + fx] = Complex64::new((-0.5 * width * width * k2).exp(), 0.0);
        }
    }
    Fft2::new(n).apply(data, &symbol)
}

/// Solution `F = z + h` with derivatives `∂h` and `∂̄h` on the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    pub n: usize,
    pub center: Point,
    pub delta: f64,
    /// Radius inside which the periodic solution equals the whole-plane one.
    pub exact_radius: f64,
    pub h: Vec<Complex64>,
    pub dh: Vec<Complex64>,
    pub dbar_h: Vec<Complex64>,
    /// Sup-norm increment of every Neumann term.
    pub increments: Vec<f64>,
    pub c0: f64,
    /// Bound on `|h|` of the whole-plane solution on the boundary ring of
    /// the cell: `‖∂̄h‖₁ / (π · distance to the support)`.
    pub far_field_bound: f64,
}

/// Grid dump for inspection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationDump {
    pub n: usize,
    pub s: f64,
    pub center: Point,
    pub h_re: Vec<f64>,
    pub h_im: Vec<f64>,
}

/// Solves the Beltrami equation by `ω = μ + μSω` (Neumann series) and
/// `h = Pω`.
pub fn solve_beltrami(grid: &CoefficientGrid, tol: f64, max_terms: usize) -> Result<DeformationField> {
    if !(tol > 0.0) || max_terms == 0 {
        return Err(Error::InvalidParameter("invalid Neumann series settings".into()));
    }
    let n = grid.n;
    let fft = Fft2::new(n);
    let (p_sym, s_sym) = symbols(n, grid.delta);
    let mu = &grid.mu;

    let mut omega = mu.clone();
    let mut increments = Vec::new();
    let mut converged = mu.iter().all(|m| *m == ZERO);
    while !converged {
        if increments.len() == max_terms {
            return Err(Error::NonConvergence(format!(
                "Neumann series did not converge in {max_terms} terms; last increment {:e}",
                increments.last().copied().unwrap_or(f64::NAN)
            )));
        }
        let s_omega = fft.apply(&omega, &s_sym);
        let mut inc: f64 = 0.0;
        for ((w, m), so) in omega.iter_mut().zip(mu).zip(&s_omega) {
            let next = m + m * so;
            inc = inc.max((next - *w).norm());
            *w = next;
        }
        increments.push(inc);
        converged = inc < tol;
    }

    let (h, dh) = if increments.is_empty() {
        (vec![ZERO; n * n], vec![ZERO; n * n])
    } else {
        (fft.apply(&omega, &p_sym), fft.apply(&omega, &s_sym))
    };
    let s = grid.half_width();
    let area = grid.delta * grid.delta;
    let l1: f64 = omega.iter().map(|w| w.norm()).sum::<f64>() * area;
    let far_field_bound = l1 / (std::f64::consts::PI * (s - grid.support_radius));

    let field = DeformationField {
        n,
        center: grid.center,
        delta: grid.delta,
        exact_radius: s - grid.support_radius,
        h,
        dh,
        dbar_h: omega,
        increments,
        c0: grid.c0,
        far_field_bound,
    };
    // Orientation: |∂F|² − |∂̄F|² > 0 wherever μ lives.
    for (k, m) in mu.iter().enumerate() {
        if *m != ZERO && field.jacobian_at(k) <= 0.0 {
            return Err(Error::DegenerateMap("isotropizing map folds inside the domain".into()));
        }
    }
    Ok(field)
}

/// Keys cubic convolution weights (a = −1/2).
fn keys(t: f64) -> [f64; 4] {
    let a = -0.5;
    let w = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            (a + 2.0) * x.powi(3) - (a + 3.0) * x * x + 1.0
        } else if x < 2.0 {
            a * x.powi(3) - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
        } else {
            0.0
        }
    };
    [w(t + 1.0), w(t), w(1.0 - t), w(2.0 - t)]
}

impl DeformationField {
    pub fn half_width(&self) -> f64 {
        0.5 * self.n as f64 * self.delta
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        node(self.center, self.delta, self.n, i, j)
    }

    /// Real Jacobian determinant `|∂F|² − |∂̄F|²` at node index `k`.
    pub fn jacobian_at(&self, k: usize) -> f64 {
        (Complex64::new(1.0, 0.0) + self.dh[k]).norm_sqr() - self.dbar_h[k].norm_sqr()
    }

    /// Jacobian matrix `[[u_x, u_y], [v_x, v_y]]` of `F = u + iv` at node `k`.
    pub fn jacobian_matrix(&self, k: usize) -> [[f64; 2]; 2] {
        let d = Complex64::new(1.0, 0.0) + self.dh[k];
        let db = self.dbar_h[k];
        let fx = d + db;
        let fy = Complex64::new(0.0, 1.0) * (d - db);
        [[fx.re, fy.re], [fx.im, fy.im]]
    }

    /// Number of Neumann terms used.
    pub fn terms(&self) -> usize {
        self.increments.len()
    }

    /// Largest ratio of successive increments.
    pub fn contraction_ratio(&self) -> Option<f64> {
        self.increments
            .windows(2)
            .filter(|w| w[0] > 1e3 * f64::EPSILON)
            .map(|w| w[1] / w[0])
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
    }

    /// `h` at `p` by bicubic interpolation.
    pub fn h_at(&self, p: Point) -> Result<Complex64> {
        let n = self.n;
        let hw = n as f64 / 2.0;
        let u = (p.x - self.center.x) / self.delta + hw;
        let v = (p.y - self.center.y) / self.delta + hw;
        let top = (n - 1) as f64;
        if !(u >= 0.0 && v >= 0.0 && u <= top && v <= top) {
            return Err(Error::InvalidParameter(format!("point ({}, {}) is outside the grid", p.x, p.y)));
        }
        let (iu, iv) = (u.floor(), v.floor());
        let (wu, wv) = (keys(u - iu), keys(v - iv));
        let (iu, iv) = (iu as isize, iv as isize);
        let wrap = |k: isize| k.rem_euclid(n as isize) as usize;
        let mut acc = ZERO;
        for (b, wb) in wv.iter().enumerate() {
            if *wb == 0.0 {
                continue;
            }
            let row = wrap(iv - 1 + b as isize) * n;
            for (a, wa) in wu.iter().enumerate() {
                if *wa == 0.0 {
                    continue;
                }
                acc += self.h[row + wrap(iu - 1 + a as isize)] * (wa * wb);
            }
        }
        Ok(acc)
    }

    /// `F(p) = p + h(p)`.
    pub fn map_point(&self, p: Point) -> Result<Point> {
        let h = self.h_at(p)?;
        Ok(Point::new(p.x + h.re, p.y + h.im))
    }

    pub fn evaluate_map(&self, points: &[Point]) -> Result<Vec<Point>> {
        points.iter().map(|&p| self.map_point(p)).collect()
    }

    pub fn dump(&self) -> DeformationDump {
        DeformationDump {
            n: self.n,
            s: self.half_width(),
            center: self.center,
            h_re: self.h.iter().map(|v| v.re).collect(),
            h_im: self.h.iter().map(|v| v.im).collect(),
        }
    }
}
