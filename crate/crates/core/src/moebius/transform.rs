//! Normalized Möbius transformations `y ↦ (ay + b)/(cy + d)` with `ad − bc = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Polyline};
use crate::{Error, Result};

/// Distance to the pole below which a point is rejected.
pub const POLE_EPS: f64 = 1e-9;
/// Smallest `|a|` for which `d = (1 + bc)/a` is computed.
pub const A_MIN: f64 = 1e-8;

/// `m = (Re a, Im a, Re b, Im b, Re c, Im c)`; `d` follows from `ad − bc = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusParams {
    pub m: [f64; 6],
}

impl Default for MoebiusParams {
    fn default() -> Self {
        Self::identity()
    }
}

pub(crate) fn to_complex(p: Point) -> Complex64 {
    Complex64::new(p.x, p.y)
}

pub(crate) fn to_point(z: Complex64) -> Point {
    Point::new(z.re, z.im)
}

impl MoebiusParams {
    pub const fn identity() -> Self {
        Self { m: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0] }
    }

    pub fn new(m: [f64; 6]) -> Result<Self> {
        let p = Self { m };
        p.coefficients()?;
        Ok(p)
    }

    /// Normalized parameters from an arbitrary nonsingular `(a, b, c, d)`.
    pub fn from_coefficients(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 0.0) || !det.re.is_finite() || !det.im.is_finite() {
            return Err(Error::InvalidParameter("Möbius coefficients are singular".into()));
        }
        let r = det.sqrt();
        let (a, b, c) = (a / r, b / r, c / r);
        Self::new([a.re, a.im, b.re, b.im, c.re, c.im])
    }

    pub fn a(&self) -> Complex64 {
        Complex64::new(self.m[0], self.m[1])
    }

    pub fn b(&self) -> Complex64 {
        Complex64::new(self.m[2], self.m[3])
    }

    pub fn c(&self) -> Complex64 {
        Complex64::new(self.m[4], self.m[5])
    }

    /// `(a, b, c, d)` with `d = (1 + bc)/a`.
    pub fn coefficients(&self) -> Result<[Complex64; 4]> {
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Möbius parameters are not finite".into()));
        }
        let (a, b, c) = (self.a(), self.b(), self.c());
        if a.norm() < A_MIN {
            return Err(Error::InvalidParameter(format!("|a| = {:e} is too small to normalize", a.norm())));
        }
        let d = (1.0 + b * c) / a;
        Ok([a, b, c, d])
    }

    /// Pole `−d/c`, if `c ≠ 0`.
    pub fn pole(&self) -> Result<Option<Complex64>> {
        let [_, _, c, d] = self.coefficients()?;
        Ok((c != Complex64::new(0.0, 0.0)).then(|| -d / c))
    }

    pub fn apply_complex(&self, z: Complex64) -> Result<Complex64> {
        let [a, b, c, d] = self.coefficients()?;
        let den = c * z + d;
        if let Some(pole) = self.pole()? {
            if (z - pole).norm() < POLE_EPS {
                return Err(Error::DegenerateMap("point lies on the pole of the Möbius map".into()));
            }
        }
        Ok((a * z + b) / den)
    }

    pub fn apply(&self, points: &[Point]) -> Result<Vec<Point>> {
        let [a, b, c, d] = self.coefficients()?;
        let pole = self.pole()?;
        points
            .iter()
            .map(|&p| {
                let z = to_complex(p);
                if pole.is_some_and(|q| (z - q).norm() < POLE_EPS) {
                    return Err(Error::DegenerateMap("point lies on the pole of the Möbius map".into()));
                }
                Ok(to_point((a * z + b) / (c * z + d)))
            })
            .collect()
    }

    /// `self ∘ inner`, the product of the coefficient matrices.
    pub fn compose(&self, inner: &MoebiusParams) -> Result<MoebiusParams> {
        let [a2, b2, c2, d2] = self.coefficients()?;
        let [a1, b1, c1, d1] = inner.coefficients()?;
        Self::from_coefficients(a2 * a1 + b2 * c1, a2 * b1 + b2 * d1, c2 * a1 + d2 * c1, c2 * b1 + d2 * d1)
    }

    /// Inverse map `(dy − b)/(−cy + a)`.
    pub fn inverse(&self) -> Result<MoebiusParams> {
        let [a, b, c, d] = self.coefficients()?;
        Self::from_coefficients(d, -b, -c, a)
    }
}

/// Cross-ratio `(z₁ − z₃)(z₂ − z₄) / ((z₂ − z₃)(z₁ − z₄))`.
pub fn cross_ratio(z: [Complex64; 4]) -> Complex64 {
    (z[0] - z[2]) * (z[1] - z[3]) / ((z[1] - z[2]) * (z[0] - z[3]))
}

/// Perimeter of a closed polyline.
pub fn perimeter(polyline: &Polyline) -> Result<f64> {
    polyline.perimeter()
}
