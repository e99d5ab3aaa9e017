use eitshape::geometry::polygon::{centroid, closed_length, contains, signed_area};
use eitshape::geometry::{
    displace_electrodes, domain_error, generate_mesh, make_chest_phantom, make_circle_domain, make_pixel_grid,
    region_overlap_areas, ChestSpec, Point,
};
use proptest::prelude::*;

/// `|A △ B| / |A|` by counting grid points, independent of polygon clipping.
fn sampled_error(a: &[Point], b: &[Point], n: usize) -> f64 {
    let (lo, hi) = a.iter().chain(b).fold(
        (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Point::new(lo.x.min(p.x), lo.y.min(p.y)), Point::new(hi.x.max(p.x), hi.y.max(p.y))),
    );
    let (hx, hy) = ((hi.x - lo.x) / n as f64, (hi.y - lo.y) / n as f64);
    let (mut in_a, mut sym) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let p = Point::new(lo.x + (i as f64 + 0.5) * hx, lo.y + (j as f64 + 0.5) * hy);
            let (pa, pb) = (contains(a, p), contains(b, p));
            in_a += pa as usize;
            sym += (pa != pb) as usize;
        }
    }
    sym as f64 / in_a as f64
}

fn circle(r: f64, c: Point, n: usize) -> Vec<Point> {
    make_circle_domain(r, c, 4, 0.1, n).unwrap().boundary().to_vec()
}

fn chest() -> Vec<Point> {
    make_chest_phantom(&ChestSpec::default()).unwrap().boundary().to_vec()
}

#[test]
fn chest_against_centered_circle_matches_sampling() {
    let truth = chest();
    let model = circle(17.5, centroid(&truth), 512);
    let e = domain_error(&truth, &model).unwrap();
    let sampled = sampled_error(&truth, &model, 1500);
    assert!((e - sampled).abs() < 2e-3, "{e} vs {sampled}");
    assert!(e >= 0.15);
    // Regression value of the default model domain.
    assert!((e - 0.2758).abs() < 5e-4, "{e}");
}

#[test]
fn overlap_areas_add_up() {
    let truth = chest();
    let model = circle(17.5, Point::new(1.0, -2.0), 400);
    let o = region_overlap_areas(&truth, &model).unwrap();
    let expected = signed_area(&truth) + signed_area(&model) - 2.0 * o.intersection;
    assert!((o.symmetric_difference() - expected).abs() < 1e-9 * expected, "{o:?} vs {expected}");
}

#[test]
fn chest_area_and_centroid() {
    let truth = chest();
    assert!((closed_length(&truth) - ChestSpec::default().perimeter).abs() < 1e-9);
    let c = centroid(&truth);
    assert!(c.y.abs() < 1e-9, "the chest is symmetric about the x axis: {c:?}");
}

#[test]
fn mesh_covers_the_domain() {
    let d = make_chest_phantom(&ChestSpec { samples: 256, ..ChestSpec::default() }).unwrap();
    let mesh = generate_mesh(&d, 6000).unwrap();
    assert!((mesh.total_area() - d.area()).abs() < 1e-9 * d.area());
    assert!(mesh.n_elements() >= 5000);
    for l in 0..d.n_electrodes() {
        assert!((mesh.electrode_length(l) - d.electrode_lengths()[l]).abs() < 1e-9);
    }
    assert!((0..mesh.n_elements()).all(|t| mesh.element_area(t) > 0.0));
}

#[test]
fn pixel_grid_follows_the_target() {
    let d = make_chest_phantom(&ChestSpec::default()).unwrap();
    let grid = make_pixel_grid(&d, 2732).unwrap();
    let n = grid.len() as f64;
    assert!((n - 2732.0).abs() <= 0.05 * 2732.0, "{n}");
    assert!(grid.centers().into_iter().all(|c| d.contains(c)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn error_is_invariant_under_rigid_motion(
        r in 5.0..20.0f64,
        dx in -5.0..5.0f64,
        dy in -5.0..5.0f64,
        angle in 0.0..std::f64::consts::TAU,
        shift in -30.0..30.0f64,
    ) {
        let a = chest();
        let b = circle(r, Point::new(dx, dy), 200);
        let e = domain_error(&a, &b).unwrap();
        let (s, c) = angle.sin_cos();
        let move_ = |p: &Point| Point::new(c * p.x - s * p.y + shift, s * p.x + c * p.y - shift);
        let a2: Vec<Point> = a.iter().map(move_).collect();
        let b2: Vec<Point> = b.iter().map(move_).collect();
        let e2 = domain_error(&a2, &b2).unwrap();
        prop_assert!((e - e2).abs() < 1e-9 * e.max(1.0));
    }

    #[test]
    fn error_is_invariant_under_scaling(k in 0.1..10.0f64, r in 5.0..20.0f64) {
        let a = chest();
        let b = circle(r, Point::default(), 200);
        let scale = |v: &[Point]| v.iter().map(|p| *p * k).collect::<Vec<_>>();
        let e = domain_error(&a, &b).unwrap();
        let e2 = domain_error(&scale(&a), &scale(&b)).unwrap();
        prop_assert!((e - e2).abs() < 1e-9 * e.max(1.0));
    }

    #[test]
    fn nested_discs_follow_the_area_ratio(r in 1.0..10.0f64, t in 0.1..0.95f64) {
        let outer = circle(r, Point::default(), 720);
        let inner = circle(t * r, Point::default(), 720);
        let e = domain_error(&outer, &inner).unwrap();
        prop_assert!((e - (1.0 - t * t)).abs() < 1e-3, "{} vs {}", e, 1.0 - t * t);
    }

    #[test]
    fn displacement_keeps_electrode_lengths(fraction in 0.0..0.35f64, seed in 0u64..1000) {
        let d = make_chest_phantom(&ChestSpec::default()).unwrap();
        let signs: Vec<f64> = (0..16).map(|l| if (seed >> (l % 10)) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let moved = displace_electrodes(&d, fraction, &signs, &[0, 1, 15]).unwrap();
        for (a, b) in d.electrode_lengths().iter().zip(moved.electrode_lengths()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let p = d.perimeter();
        for l in [0, 1, 15] {
            prop_assert_eq!(moved.electrodes()[l], d.electrodes()[l]);
        }
        for l in 2..15 {
            let shift = (moved.electrodes()[l].start_s - d.electrodes()[l].start_s).rem_euclid(p);
            let shift = if shift > p / 2.0 { shift - p } else { shift };
            prop_assert!((shift - signs[l] * fraction * 2.0).abs() < 1e-9, "{} {}", l, shift);
        }
    }
}
