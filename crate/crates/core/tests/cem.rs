mod common;

use common::{disc_mesh, fd_block, norm, rel_frobenius, toy};

use eitshape::cem::{solve_cem, tensor_at, CurrentPatterns, ForwardModel, MeasurementOperator, Protocol, SymTensor};
use eitshape::geometry::{generate_mesh, make_circle_domain, Point};
use faer::Mat;
use proptest::prelude::*;

#[test]
fn axis_aligned_tensor_quarter_turn() {
    let g = tensor_at(4.0, 1.0, std::f64::consts::FRAC_PI_2).unwrap();
    assert!((g.xx - 0.5).abs() < 1e-15 && g.xy.abs() < 1e-15 && (g.yy - 2.0).abs() < 1e-15);
}

#[test]
fn zero_current_gives_zero_potentials() {
    let mesh = disc_mesh(8, 1500);
    let model = ForwardModel::new(mesh.clone(), 8).unwrap();
    let sigma = vec![SymTensor::isotropic(1.0); mesh.n_elements()];
    let patterns = CurrentPatterns::new(vec![vec![0.0; 8]], 8).unwrap();
    let sol = model.solve(&sigma, &[0.01; 8], &patterns).unwrap();
    assert!(sol.electrode_potentials(0).iter().all(|&u| u == 0.0));
    let protocol = Protocol { patterns, measurement: MeasurementOperator::full_potential(8) };
    let (_, v) = solve_cem(&mesh, &sigma, &[0.01; 8], &protocol).unwrap();
    assert!(v.iter().all(|&x| x == 0.0));
}

#[test]
fn charge_conservation_ground_and_residual() {
    let mesh = disc_mesh(16, 1500);
    let model = ForwardModel::new(mesh.clone(), 16).unwrap();
    let sigma: Vec<SymTensor> = (0..mesh.n_elements())
        .map(|t| {
            let c = mesh.centroid(t);
            tensor_at(2.0, 1.0 + 0.5 * c.x, 0.3 + c.y).unwrap()
        })
        .collect();
    let z: Vec<f64> = (0..16).map(|l| 0.01 + 0.002 * l as f64).collect();
    let patterns = CurrentPatterns::adjacent(16, 3.0);
    let sol = model.solve(&sigma, &z, &patterns).unwrap();
    for j in 0..16 {
        let x = sol.state(j);
        let u = sol.electrode_potentials(j);
        assert!(u.iter().sum::<f64>().abs() <= 1e-10 * norm(&u));
        let currents = model.electrode_currents(&x, &z);
        assert!(currents.iter().sum::<f64>().abs() <= 1e-10 * norm(&currents));
        for (a, b) in currents.iter().zip(&patterns.currents[j]) {
            assert!((a - b).abs() <= 1e-8 * 3.0, "{a} vs {b}");
        }
        // The grounded solution solves the original singular system.
        let ax = model.apply_ungrounded(&sigma, &z, &x).unwrap();
        let n = model.n_nodes();
        let mut rhs = vec![0.0; model.dim()];
        rhs[n..].copy_from_slice(&patterns.currents[j]);
        let res: Vec<f64> = ax.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm(&res) <= 1e-9 * norm(&rhs));
    }
}

#[test]
fn measurements_compose_operator_with_potentials() {
    let mesh = disc_mesh(16, 1500);
    let sigma = vec![SymTensor::isotropic(1.0); mesh.n_elements()];
    let protocol = Protocol::adjacent(16, 3.0);
    let (u, v) = solve_cem(&mesh, &sigma, &[0.01; 16], &protocol).unwrap();
    assert_eq!(v.len(), 256);
    for j in 0..16 {
        let expect = protocol.measurement.apply(&u[j]);
        assert_eq!(&v[j * 16..(j + 1) * 16], expect.as_slice());
    }
}

#[test]
fn resistance_matrix_is_symmetric_and_balanced() {
    let mesh = disc_mesh(16, 1500);
    let model = ForwardModel::new(mesh.clone(), 16).unwrap();
    let sigma: Vec<SymTensor> =
        (0..mesh.n_elements()).map(|t| tensor_at(1.5, 1.0 + 0.3 * mesh.centroid(t).x, 0.4).unwrap()).collect();
    let z: Vec<f64> = (0..16).map(|l| 0.005 + 0.001 * l as f64).collect();
    let r = model.resistance_matrix(&sigma, &z).unwrap();
    let mut asym = 0.0;
    let mut total = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            asym += (r[i][j] - r[j][i]).powi(2);
            total += r[i][j].powi(2);
        }
        let row: f64 = r[i].iter().sum();
        assert!(row.abs() < 1e-10 * total.sqrt().max(1.0));
    }
    assert!((asym / total).sqrt() <= 1e-10);

    // Doubling the conductivity and halving z halves R.
    let sigma2: Vec<SymTensor> = sigma.iter().map(|s| s.scale(2.0)).collect();
    let z2: Vec<f64> = z.iter().map(|v| v / 2.0).collect();
    let r2 = model.resistance_matrix(&sigma2, &z2).unwrap();
    for i in 0..16 {
        for j in 0..16 {
            assert!((r2[i][j] - 0.5 * r[i][j]).abs() <= 1e-10 * total.sqrt());
        }
    }
}

#[test]
fn rotating_electrode_labels_conjugates_resistance_matrix() {
    let mesh = disc_mesh(16, 3000);
    let model = ForwardModel::new(mesh.clone(), 16).unwrap();
    let sigma = vec![SymTensor::isotropic(1.0); mesh.n_elements()];
    let r = model.resistance_matrix(&sigma, &[0.01; 16]).unwrap();
    let scale = r.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for shift in [1, 4, 7] {
        let mut diff = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                diff += (r[(i + shift) % 16][(j + shift) % 16] - r[i][j]).powi(2);
            }
        }
        assert!(diff.sqrt() <= 0.01 * scale, "shift {shift}: {}", diff.sqrt() / scale);
    }
}

#[test]
fn coarse_mesh_agrees_with_four_times_finer_mesh() {
    let d = make_circle_domain(1.0, Point::default(), 16, 0.2, 1024).unwrap();
    let protocol = Protocol::adjacent(16, 1.0);
    let z = [0.1; 16];
    let solve = |target| {
        let mesh = generate_mesh(&d, target).unwrap();
        let sigma = vec![SymTensor::isotropic(1.0); mesh.n_elements()];
        solve_cem(&mesh, &sigma, &z, &protocol).unwrap().1
    };
    let coarse = solve(11398);
    let fine = solve(4 * 11398);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!((c - f).abs() <= 0.005 * f.abs(), "{c} vs {f}");
    }
}

#[test]
fn adjoint_jacobian_matches_finite_differences() {
    let (model, field, z) = toy();
    let lin = model.linearize(&field, &z).unwrap();
    let nd = model.n_data();
    let np = model.n_pixels();

    let d_eta = fd_block(
        nd,
        np,
        |p, h| {
            let mut f = field.clone();
            f.eta[p] += h;
            model.predict(&f, &z).unwrap()
        },
        |p| field.eta[p],
    );
    assert!(rel_frobenius(&lin.d_eta, &d_eta) <= 1e-4);

    let d_theta = fd_block(
        nd,
        np,
        |p, h| {
            let mut f = field.clone();
            f.theta[p] += h;
            model.predict(&f, &z).unwrap()
        },
        |p| field.theta[p],
    );
    assert!(rel_frobenius(&lin.d_theta, &d_theta) <= 1e-4);

    let d_z = fd_block(
        nd,
        8,
        |l, h| {
            let mut zz = z.clone();
            zz[l] += h;
            model.predict(&field, &zz).unwrap()
        },
        |l| z[l],
    );
    assert!(rel_frobenius(&lin.d_z, &d_z) <= 1e-4);

    let d_lambda = fd_block(
        nd,
        1,
        |_, h| {
            let mut f = field.clone();
            f.lambda += h;
            model.predict(&f, &z).unwrap()
        },
        |_| field.lambda,
    );
    let lam = Mat::from_fn(nd, 1, |i, _| lin.d_lambda[i]);
    assert!(rel_frobenius(&lam, &d_lambda) <= 1e-4);
}

#[test]
fn theta_block_vanishes_when_isotropic() {
    let (model, mut field, z) = toy();
    field.lambda = 1.0;
    let lin = model.linearize(&field, &z).unwrap();
    for j in 0..lin.d_theta.ncols() {
        for i in 0..lin.d_theta.nrows() {
            assert_eq!(lin.d_theta[(i, j)], 0.0);
        }
    }
}

#[test]
fn linearization_readings_match_predict() {
    let (model, field, z) = toy();
    let lin = model.linearize(&field, &z).unwrap();
    let v = model.predict(&field, &z).unwrap();
    assert_eq!(lin.v, v);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_identity(c in 0.1f64..10.0, eta in 0.2f64..5.0, lambda in 0.5f64..3.0, theta in -1.5f64..1.5) {
        let mesh = disc_mesh(8, 1500);
        let sigma = vec![tensor_at(lambda, eta, theta).unwrap(); mesh.n_elements()];
        let z = vec![0.02; 8];
        let protocol = Protocol::adjacent(8, 1.0);
        let (_, v) = solve_cem(&mesh, &sigma, &z, &protocol).unwrap();
        let sigma_c: Vec<SymTensor> = sigma.iter().map(|s| s.scale(c)).collect();
        let z_c: Vec<f64> = z.iter().map(|x| x / c).collect();
        let (_, vc) = solve_cem(&mesh, &sigma_c, &z_c, &protocol).unwrap();
        let err: Vec<f64> = v.iter().zip(&vc).map(|(a, b)| a / c - b).collect();
        prop_assert!(norm(&err) <= 1e-10 * norm(&vc));
    }
}

#[test]
fn length_preserving_deformation_keeps_readings() {
    let dev = common::length_preserving_deviation(11398);
    assert!(dev <= 0.01, "relative deviation {dev}");
}
