//! Oracles shared by the module tests and the acceptance run.

use std::f64::consts::PI;

use eitshape::beltrami::{CoefficientGrid, ConformalImage, DeformationField};
use eitshape::cem::{AnisotropicField, PixelModel, Protocol};
use eitshape::geometry::polygon::open_length;
use eitshape::geometry::{generate_mesh, make_circle_domain, make_pixel_grid, Mesh, Point, Polyline};
use eitshape::moebius::{GeometricTargets, MeasureKind, MoebiusParams};
use faer::Mat;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn disc_mesh(l: usize, target: usize) -> Mesh {
    let d = make_circle_domain(1.0, Point::default(), l, 0.2, 128).unwrap();
    generate_mesh(&d, target).unwrap()
}

pub fn rel_frobenius(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            num += (a[(i, j)] - b[(i, j)]).powi(2);
            den += b[(i, j)].powi(2);
        }
    }
    (num / den).sqrt()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn toy() -> (PixelModel, AnisotropicField, Vec<f64>) {
    let d = make_circle_domain(1.0, Point::default(), 8, 0.25, 64).unwrap();
    let mesh = generate_mesh(&d, 500).unwrap();
    let grid = make_pixel_grid(&d, 5).unwrap();
    let np = grid.len();
    let model = PixelModel::new(mesh, &grid, Protocol::adjacent(8, 1.0)).unwrap();
    let eta: Vec<f64> = (0..np).map(|k| 0.8 + 0.15 * k as f64).collect();
    let theta: Vec<f64> = (0..np).map(|k| 0.3 - 0.2 * k as f64).collect();
    let field = AnisotropicField::new(1.6, eta, theta).unwrap();
    let z: Vec<f64> = (0..8).map(|l| 0.05 + 0.01 * l as f64).collect();
    (model, field, z)
}

pub fn fd_block(
    n_rows: usize,
    n_params: usize,
    eval: impl Fn(usize, f64) -> Vec<f64>,
    at: impl Fn(usize) -> f64,
) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(n_rows, n_params);
    for p in 0..n_params {
        let h = 1e-6 * (1.0 + at(p).abs());
        let vp = eval(p, h);
        let vm = eval(p, -h);
        for i in 0..n_rows {
            out[(i, p)] = (vp[i] - vm[i]) / (2.0 * h);
        }
    }
    out
}

pub fn bump_grid(n: usize, amplitude: f64) -> CoefficientGrid {
    let s = 1.0;
    let delta = 2.0 * s / n as f64;
    let sigma = s / 12.0;
    let radius = 0.5 * s;
    let center = Point::new(0.3, -0.2);
    let mut mu = vec![ZERO; n * n];
    for j in 0..n {
        for i in 0..n {
            let x = Point::new(
                center.x + (i as f64 - n as f64 / 2.0) * delta,
                center.y + (j as f64 - n as f64 / 2.0) * delta,
            );
            let r = x.dist(center);
            if r <= radius {
                let phase = Complex64::from_polar(1.0, 2.0 * (x.y - center.y));
                mu[j * n + i] = phase * amplitude * (-r * r / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    CoefficientGrid::new(n, center, delta, radius, mu).unwrap()
}

/// `‖∂̄F − μ∂F‖ / ‖∂F‖` by central differences over nodes within `reach` of the center.
pub fn fd_residual(def: &DeformationField, grid: &CoefficientGrid, reach: f64) -> f64 {
    let n = def.n;
    let f = |i: usize, j: usize| {
        let p = def.node(i, j);
        Complex64::new(p.x, p.y) + def.h[j * n + i]
    };
    let (mut num, mut den) = (0.0, 0.0);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            if def.node(i, j).dist(def.center) > reach {
                continue;
            }
            let fx = (f(i + 1, j) - f(i - 1, j)) / (2.0 * def.delta);
            let fy = (f(i, j + 1) - f(i, j - 1)) / (2.0 * def.delta);
            let i_unit = Complex64::new(0.0, 1.0);
            let d = 0.5 * (fx - i_unit * fy);
            let dbar = 0.5 * (fx + i_unit * fy);
            num += (dbar - grid.mu[j * n + i] * d).norm_sqr();
            den += d.norm_sqr();
        }
    }
    (num / den).sqrt()
}

pub fn circle(radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            Point::new(radius * t.cos(), radius * t.sin())
        })
        .collect()
}

/// Circle image with `l` electrode arcs, each sampled by 9 points.
pub fn circle_image(radius: f64, l: usize, electrode_length: f64) -> ConformalImage {
    let half = 0.5 * electrode_length / radius;
    let electrode_arcs: Vec<Vec<Point>> = (0..l)
        .map(|k| {
            let c = 2.0 * PI * k as f64 / l as f64;
            (0..9)
                .map(|i| {
                    let t = c - half + 2.0 * half * i as f64 / 8.0;
                    Point::new(radius * t.cos(), radius * t.sin())
                })
                .collect()
        })
        .collect();
    let electrode_lengths = electrode_arcs.iter().map(|a| open_length(a)).collect();
    ConformalImage {
        boundary: circle(radius, 1024),
        electrode_arcs,
        electrode_lengths,
        samples: vec![],
        max_anisotropy: 0.0,
    }
}

pub fn targets_from(image: &ConformalImage, m: &MoebiusParams, beta: f64) -> GeometricTargets {
    let boundary = m.apply(&image.boundary).unwrap();
    GeometricTargets {
        d_true: Polyline::closed(boundary).perimeter().unwrap(),
        electrode_lengths_true: image.electrode_arcs.iter().map(|a| open_length(&m.apply(a).unwrap())).collect(),
        beta,
        measure: MeasureKind::Perimeter,
    }
}
