//! Symmetric conductivity tensors and the `(λ, η, θ)` parameterization.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Symmetric 2×2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn isotropic(s: f64) -> Self {
        Self { xx: s, xy: 0.0, yy: s }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    /// `aᵀ T b` for plane vectors `a`, `b`.
    pub fn bilinear(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * (self.xx * b[0] + self.xy * b[1]) + a[1] * (self.xy * b[0] + self.yy * b[1])
    }

    /// Contraction with the symmetric product coefficients
    /// `(a₁b₁, a₁b₂ + a₂b₁, a₂b₂)`.
    pub fn contract(&self, p: [f64; 3]) -> f64 {
        self.xx * p[0] + self.xy * p[1] + self.yy * p[2]
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m + r, m - r)
    }

    /// Ratio of the larger to the smaller eigenvalue.
    pub fn anisotropy(&self) -> f64 {
        let (a, b) = self.eigenvalues();
        a / b
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }
}

/// Derivatives of [`tensor_at`] with respect to its three arguments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorDerivs {
    pub d_lambda: SymTensor,
    pub d_eta: SymTensor,
    pub d_theta: SymTensor,
}

fn check(lambda: f64, eta: f64, theta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParameter("theta must be finite".into()));
    }
    Ok(())
}

/// `η · R(θ) diag(√λ, 1/√λ) R(θ)ᵀ`; determinant `η²`, anisotropy ratio `λ`.
pub fn tensor_at(lambda: f64, eta: f64, theta: f64) -> Result<SymTensor> {
    check(lambda, eta, theta)?;
    Ok(tensor_unchecked(lambda, eta, theta))
}

pub(crate) fn tensor_unchecked(lambda: f64, eta: f64, theta: f64) -> SymTensor {
    let a = lambda.sqrt();
    let b = 1.0 / a;
    let (s, c) = theta.sin_cos();
    SymTensor::new(eta * (c * c * a + s * s * b), eta * c * s * (b - a), eta * (s * s * a + c * c * b))
}

/// Value and partial derivatives of [`tensor_at`].
pub fn tensor_derivs(lambda: f64, eta: f64, theta: f64) -> Result<(SymTensor, TensorDerivs)> {
    check(lambda, eta, theta)?;
    Ok(tensor_derivs_unchecked(lambda, eta, theta))
}

pub(crate) fn tensor_derivs_unchecked(lambda: f64, eta: f64, theta: f64) -> (SymTensor, TensorDerivs) {
    let a = lambda.sqrt();
    let b = 1.0 / a;
    let da = 0.5 / a;
    let db = -0.5 / (lambda * a);
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let g = tensor_unchecked(lambda, eta, theta);
    let d_lambda =
        SymTensor::new(eta * (c * c * da + s * s * db), eta * c * s * (db - da), eta * (s * s * da + c * c * db));
    let d_theta = SymTensor::new(eta * s2 * (b - a), eta * c2 * (b - a), eta * s2 * (a - b));
    let d_eta = g.scale(1.0 / eta);
    (g, TensorDerivs { d_lambda, d_eta, d_theta })
}

/// Pixelwise anisotropic conductivity: `η` and `θ` per pixel, one global `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicField {
    pub lambda: f64,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
}

impl AnisotropicField {
    pub fn new(lambda: f64, eta: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let f = Self { lambda, eta, theta };
        f.validate()?;
        Ok(f)
    }

    /// Isotropic field with constant `η` on `n` pixels.
    pub fn constant(n: usize, eta: f64) -> Self {
        Self { lambda: 1.0, eta: vec![eta; n], theta: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta.len() != self.theta.len() {
            return Err(Error::InvalidParameter("eta and theta lengths differ".into()));
        }
        check(self.lambda, 1.0, 0.0)?;
        for (&e, &t) in self.eta.iter().zip(&self.theta) {
            check(1.0, e, t)?;
        }
        Ok(())
    }

    pub fn tensor(&self, k: usize) -> SymTensor {
        tensor_unchecked(self.lambda, self.eta[k], self.theta[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn isotropic_when_lambda_is_one() {
        let g = tensor_at(1.0, 2.0, 0.7).unwrap();
        assert!((g.xx - 2.0).abs() < 1e-15 && g.xy.abs() < 1e-15 && (g.yy - 2.0).abs() < 1e-15);
    }

    #[test]
    fn axis_aligned_example() {
        let g = tensor_at(4.0, 1.0, 0.0).unwrap();
        assert_eq!(g, SymTensor::new(2.0, 0.0, 0.5));
    }

    #[test]
    fn nonpositive_inputs_rejected() {
        assert!(tensor_at(0.0, 1.0, 0.0).is_err());
        assert!(tensor_at(1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let (l, e, t) = (2.3, 0.7, 0.4);
        let (_, d) = tensor_derivs(l, e, t).unwrap();
        let h = 1e-6;
        let fd = |f: &dyn Fn(f64) -> SymTensor| {
            let (p, m) = (f(h), f(-h));
            SymTensor::new((p.xx - m.xx) / (2.0 * h), (p.xy - m.xy) / (2.0 * h), (p.yy - m.yy) / (2.0 * h))
        };
        let cases = [
            (d.d_lambda, fd(&|s| tensor_unchecked(l + s, e, t))),
            (d.d_eta, fd(&|s| tensor_unchecked(l, e + s, t))),
            (d.d_theta, fd(&|s| tensor_unchecked(l, e, t + s))),
        ];
        for (a, b) in cases {
            assert!((a.xx - b.xx).abs() < 1e-8);
            assert!((a.xy - b.xy).abs() < 1e-8);
            assert!((a.yy - b.yy).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn determinant_and_anisotropy(
            lambda in 0.05f64..20.0,
            eta in 0.01f64..100.0,
            theta in -PI..PI,
        ) {
            let g = tensor_at(lambda, eta, theta).unwrap();
            prop_assert!((g.det() - eta * eta).abs() <= 1e-12 * eta * eta);
            let ratio = g.anisotropy();
            let expect = lambda.max(1.0 / lambda);
            prop_assert!((ratio - expect).abs() <= 1e-9 * expect);
            prop_assert!(g.is_positive_definite());
        }
    }
}
