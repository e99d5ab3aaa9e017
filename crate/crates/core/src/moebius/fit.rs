//! Fitting the Möbius transformation to the known perimeter and electrode
//! lengths with a nonmonotone Barzilai-Borwein gradient method.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::transform::{to_complex, MoebiusParams};
use crate::beltrami::ConformalImage;
use crate::geometry::polygon::{closed_length, open_length};
use crate::geometry::Point;
use crate::{Error, Result};

/// Objective value returned for candidates whose pole is too close to the
/// domain.
pub const POLE_PENALTY: f64 = 1e20;

/// Which size measure `d(·)` is matched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    #[default]
    Perimeter,
    Width,
    Height,
}

impl MeasureKind {
    pub fn measure(self, boundary: &[Point]) -> f64 {
        let extent = |f: fn(&Point) -> f64| {
            let (lo, hi) =
                boundary.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            hi - lo
        };
        match self {
            MeasureKind::Perimeter => closed_length(boundary),
            MeasureKind::Width => extent(|p| p.x),
            MeasureKind::Height => extent(|p| p.y),
        }
    }
}

/// Known geometry of the physical domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricTargets {
    pub d_true: f64,
    pub electrode_lengths_true: Vec<f64>,
    pub beta: f64,
    #[serde(default)]
    pub measure: MeasureKind,
}

impl GeometricTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_true > 0.0 && self.d_true.is_finite()) {
            return Err(Error::InvalidParameter("target measure must be positive".into()));
        }
        if self.electrode_lengths_true.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter("electrode lengths must be positive".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter("beta must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoebiusConfig {
    /// Nonmonotone memory.
    pub memory: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant.
    pub gamma: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Stop once `√objective ≤ rel_tol · d_true`.
    pub rel_tol: f64,
}

impl Default for MoebiusConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            initial_step: 1e-3,
            min_step: 1e-10,
            max_step: 1e3,
            max_iters: 500,
            gamma: 1e-4,
            fd_step: 1e-6,
            rel_tol: 1e-10,
        }
    }
}

impl MoebiusConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.memory > 0
            && self.min_step > 0.0
            && self.max_step >= self.min_step
            && (self.min_step..=self.max_step).contains(&self.initial_step)
            && self.gamma > 0.0
            && self.gamma < 1.0
            && self.fd_step > 0.0
            && self.rel_tol >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter("invalid Möbius fit settings".into()));
        }
        Ok(())
    }
}

/// Objective value; `pole` marks a candidate rejected by the soft barrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub pole: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// Three consecutive restarts without decrease.
    pub stalled: bool,
    pub max_iters: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusFit {
    pub m: MoebiusParams,
    pub objective: f64,
    pub flags: FitFlags,
    pub iterations: usize,
}

/// Center and radius of a disc containing `pts`.
fn bounding_disc(pts: &[Point]) -> (Point, f64) {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Point::default(), |acc, p| Point::new(acc.x + p.x / n, acc.y + p.y / n));
    let r = pts.iter().map(|p| p.dist(c)).fold(0.0, f64::max);
    (c, r)
}

/// Precomputed pieces of the objective.
struct Problem<'a> {
    image: &'a ConformalImage,
    targets: &'a GeometricTargets,
    disc: (Point, f64),
}

impl<'a> Problem<'a> {
    fn new(image: &'a ConformalImage, targets: &'a GeometricTargets) -> Result<Self> {
        targets.validate()?;
        if image.boundary.len() < 3 {
            return Err(Error::Geometry("image boundary needs at least 3 vertices".into()));
        }
        if targets.beta > 0.0 && targets.electrode_lengths_true.len() != image.electrode_arcs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} target electrode lengths for {} electrodes",
                targets.electrode_lengths_true.len(),
                image.electrode_arcs.len()
            )));
        }
        Ok(Self { image, targets, disc: bounding_disc(&image.boundary) })
    }

    fn eval(&self, m: &MoebiusParams) -> ObjectiveValue {
        let rejected = ObjectiveValue { value: POLE_PENALTY, pole: true };
        let Ok(pole) = m.pole() else { return rejected };
        if let Some(q) = pole {
            let (c, r) = self.disc;
            if (q - to_complex(c)).norm() <= r {
                return rejected;
            }
        }
        let Ok(boundary) = m.apply(&self.image.boundary) else { return rejected };
        let mismatch = self.targets.d_true - self.targets.measure.measure(&boundary);
        let mut value = mismatch * mismatch;
        if self.targets.beta > 0.0 {
            let mut sum = 0.0;
            for (arc, target) in self.image.electrode_arcs.iter().zip(&self.targets.electrode_lengths_true) {
                let Ok(mapped) = m.apply(arc) else { return rejected };
                sum += (open_length(&mapped) - target).powi(2);
            }
            value += self.targets.beta * sum;
        }
        if value.is_finite() {
            ObjectiveValue { value, pole: false }
        } else {
            rejected
        }
    }

    fn value(&self, x: &[f64; 6]) -> f64 {
        self.eval(&MoebiusParams { m: *x }).value
    }

    fn gradient(&self, x: &[f64; 6], rel: f64) -> [f64; 6] {
        let h = rel * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut g = [0.0; 6];
        for i in 0..6 {
            let (mut xp, mut xm) = (*x, *x);
            xp[i] += h;
            xm[i] -= h;
            g[i] = (self.value(&xp) - self.value(&xm)) / (2.0 * h);
        }
        g
    }
}

/// `(d(Ω) − d(M(Ω_i)))² + β Σ_ℓ (|M(ê_ℓ)| − |e_ℓ|)²`.
pub fn objective(m: &MoebiusParams, image: &ConformalImage, targets: &GeometricTargets) -> Result<ObjectiveValue> {
    Ok(Problem::new(image, targets)?.eval(m))
}

fn dot(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nonmonotone Barzilai-Borwein minimization started at the identity.
/// Returns the best iterate seen.
pub fn fit(image: &ConformalImage, targets: &GeometricTargets, cfg: &MoebiusConfig) -> Result<MoebiusFit> {
    cfg.validate()?;
    let problem = Problem::new(image, targets)?;
    let mut x = MoebiusParams::identity().m;
    let mut f = problem.value(&x);
    if f >= POLE_PENALTY {
        return Err(Error::NonConvergence("Möbius objective is undefined at the identity".into()));
    }
    let mut g = problem.gradient(&x, cfg.fd_step);
    // First and restart steps move no parameter by more than `initial_step`.
    let first_step = |g: &[f64; 6]| {
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (cfg.initial_step / gmax.max(1.0)).max(cfg.min_step)
    };
    let mut alpha = first_step(&g);
    let mut recent: VecDeque<f64> = VecDeque::from([f]);
    let (mut best_x, mut best_f) = (x, f);
    let mut flags = FitFlags::default();
    let mut failures = 0;
    let mut iterations = 0;

    let f_tol = (cfg.rel_tol * targets.d_true).powi(2);
    while f > f_tol {
        if iterations == cfg.max_iters {
            flags.max_iters = true;
            break;
        }
        iterations += 1;
        let gg = dot(&g, &g);
        if !(gg > 0.0) {
            break;
        }
        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = x;
            trial.iter_mut().zip(&g).for_each(|(t, gi)| *t -= lam * alpha * gi);
            let ft = problem.value(&trial);
            if ft <= reference - cfg.gamma * lam * alpha * gg {
                accepted = Some((trial, ft));
                break;
            }
            lam *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            failures += 1;
            if failures >= 3 {
                flags.stalled = true;
                break;
            }
            alpha = first_step(&g);
            continue;
        };
        failures = 0;
        let gn = problem.gradient(&xn, cfg.fd_step);
        let mut s = [0.0; 6];
        let mut y = [0.0; 6];
        for i in 0..6 {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 { (dot(&s, &s) / sy).clamp(cfg.min_step, cfg.max_step) } else { cfg.max_step };
        let step = dot(&s, &s).sqrt();
        x = xn;
        f = fn_;
        g = gn;
        recent.push_back(f);
        if recent.len() > cfg.memory {
            recent.pop_front();
        }
        if f < best_f {
            best_f = f;
            best_x = x;
        }
        if step <= 1e-15 * (1.0 + dot(&x, &x).sqrt()) {
            break;
        }
    }
    let m = MoebiusParams::new(best_x)?;
    Ok(MoebiusFit { m, objective: best_f, flags, iterations })
}
