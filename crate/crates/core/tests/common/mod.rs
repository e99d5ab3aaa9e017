//! Helpers shared by the integration tests.

#![allow(dead_code)]

mod oracles;
pub use oracles::*;

use std::f64::consts::PI;

use eitshape::beltrami::push_forward;
use eitshape::cem::{simulate, Protocol, SymTensor};
use eitshape::geometry::{generate_mesh, make_chest_phantom, make_circle_domain, ChestSpec, Domain2D, Point};

/// Map from the disc of radius `R = perimeter / 2π` onto a chest-shaped
/// domain of the same perimeter. The ray at angle `φ` goes to the ray
/// through the boundary point at arclength `Rφ`, so boundary arclength is
/// preserved.
pub struct RadialMap {
    pub radius: f64,
    pub target: Domain2D,
}

impl RadialMap {
    pub fn new(perimeter: f64, n_electrodes: usize, electrode_length: f64) -> Self {
        let target =
            make_chest_phantom(&ChestSpec { perimeter, n_electrodes, electrode_length, ..ChestSpec::default() })
                .unwrap();
        Self { radius: perimeter / (2.0 * PI), target }
    }

    fn rim(&self, phi: f64) -> Point {
        let p = self.target.perimeter();
        self.target.point_at((self.radius * phi).rem_euclid(p))
    }

    pub fn forward(&self, x: Point) -> Point {
        let phi = x.y.atan2(x.x);
        self.rim(phi) * (x.norm() / self.radius)
    }

    pub fn inverse(&self, y: Point) -> Point {
        let alpha = y.y.atan2(y.x);
        // The rim angle is increasing in φ; bracket and bisect.
        let angle = |phi: f64| {
            let q = self.rim(phi);
            let mut d = q.y.atan2(q.x) - alpha;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            d
        };
        let (mut lo, mut hi) = (alpha - 1.0, alpha + 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if angle(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let phi = 0.5 * (lo + hi);
        let rho = self.radius * y.norm() / self.rim(phi).norm();
        Point::new(rho * phi.cos(), rho * phi.sin())
    }

    pub fn jacobian(&self, x: Point) -> [[f64; 2]; 2] {
        let h = 1e-6 * self.radius;
        let dx = (self.forward(x + Point::new(h, 0.0)) - self.forward(x - Point::new(h, 0.0))) * (0.5 / h);
        let dy = (self.forward(x + Point::new(0.0, h)) - self.forward(x - Point::new(0.0, h))) * (0.5 / h);
        [[dx.x, dy.x], [dx.y, dy.y]]
    }
}

/// Relative difference between readings on a disc with a smooth isotropic
/// conductivity and readings on its length-preserving deformation carrying
/// the push-forward conductivity, both meshed independently with
/// `elements` triangles.
pub fn length_preserving_deviation(elements: usize) -> f64 {
    let (l, len) = (16, 2.0);
    let map = RadialMap::new(102.33, l, len);
    let disc = make_circle_domain(map.radius, Point::default(), l, len, 512).unwrap();
    let bump = Point::new(4.0, 3.0);
    let gamma = |x: Point| 3.0 * (1.0 + 0.5 * (-(x - bump).norm().powi(2) / 25.0).exp());
    let protocol = Protocol::adjacent(l, 3.0);
    let z: Vec<f64> = (0..l).map(|k| 3e-3 * (1.0 + 0.03 * k as f64)).collect();

    let mesh = generate_mesh(&disc, elements).unwrap();
    let sigma: Vec<SymTensor> = (0..mesh.n_elements()).map(|t| SymTensor::isotropic(gamma(mesh.centroid(t)))).collect();
    let (v, _) = simulate(&mesh, &sigma, &z, &protocol, 0.0, 0).unwrap();

    let mesh2 = generate_mesh(&map.target, elements).unwrap();
    let sigma2: Vec<SymTensor> = (0..mesh2.n_elements())
        .map(|t| {
            let x = map.inverse(mesh2.centroid(t));
            push_forward(&SymTensor::isotropic(gamma(x)), &map.jacobian(x)).unwrap()
        })
        .collect();
    let (v2, _) = simulate(&mesh2, &sigma2, &z, &protocol, 0.0, 0).unwrap();

    let num: f64 = v.iter().zip(&v2).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = v.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}
