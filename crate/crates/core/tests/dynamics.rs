use std::f64::consts::{PI, TAU};

use bowen_dim::dynamics::{
    classify_orbit, default_basin_radius, derivative, evaluate, fixed_points, iterate, orbit_derivative, param_derivative_at,
    repelling_fixed_point, OrbitTag,
};
use bowen_dim::{CylinderPoint, MapParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn p(ell: u32, re: f64, im: f64) -> MapParams {
    MapParams::new(ell, Complex64::new(re, im)).unwrap()
}

fn c_in_disk(ell: u32, r: f64) -> impl Strategy<Value = MapParams> {
    (0.0..r, 0.0..TAU).prop_map(move |(rho, a)| MapParams::new(ell, f64::from(ell) + Complex64::from_polar(rho, a)).unwrap())
}

#[test]
fn log_c_is_fixed_with_multiplier_ell_minus_c() {
    for (ell, c) in [(2, Complex64::new(2.0, 0.0)), (2, Complex64::new(2.5, 0.5)), (3, Complex64::new(2.3, -0.4))] {
        let params = MapParams::new(ell, c).unwrap();
        let z = CylinderPoint::from_complex(c.ln());
        assert!(evaluate(&params, z).distance(&z) < 1e-13);
        assert!((derivative(&params, z) - (f64::from(ell) - c)).norm() < 1e-13);
    }
}

#[test]
fn fixed_points_satisfy_lifted_equation() {
    let params = p(2, 2.0, 0.0);
    let report = fixed_points(&params, -6..=6, 1e-11).unwrap();
    assert!(report.non_convergence.is_empty());
    for q in &report.points {
        // f(q) − q is a multiple of 2πi
        let g = params.lift(q.point.lift()) - q.point.lift();
        assert!(g.re.abs() < 1e-11);
        assert!((g.im / TAU - (g.im / TAU).round()).abs() < 1e-11);
        assert!((q.multiplier - (2.0 - q.point.lift().exp())).norm() < 1e-12);
    }
    // the two fixed points with lift index ±1 are repelling and conjugate
    let a = repelling_fixed_point(&params, 1).unwrap();
    let b = repelling_fixed_point(&params, -1).unwrap();
    assert!(a.point.conj().distance(&b.point) < 1e-12);
    assert!(a.multiplier.norm() > 1.0);
}

#[test]
fn derivative_matches_central_difference() {
    let params = p(2, 2.2, 0.3);
    let z = Complex64::new(0.7, -1.1);
    let mut prev = f64::INFINITY;
    for h in [1e-2, 5e-3, 2.5e-3] {
        let fd = (params.lift(z + h) - params.lift(z - h)) / (2.0 * h);
        let err = (fd - derivative(&params, CylinderPoint::from_complex(z))).norm();
        // second order: halving h divides the error by about four
        assert!(err < prev / 3.0);
        prev = err;
    }
}

#[test]
fn param_derivative_matches_central_difference() {
    let (ell, c) = (3, Complex64::new(2.6, 0.4));
    let z = Complex64::new(-0.3, 0.8);
    let f = |c: Complex64| MapParams::new(ell, c).unwrap().lift(z);
    let mut prev = f64::INFINITY;
    for h in [1e-2, 5e-3, 2.5e-3] {
        let fd = (f(c + h) - f(c - h)) / (2.0 * h);
        let err = (fd - param_derivative_at(ell, c)).norm();
        assert!(err < prev / 3.0 || err < 1e-12);
        prev = err;
    }
}

#[test]
fn left_half_plane_is_baker() {
    let params = p(2, 2.0, 0.0);
    let eps = default_basin_radius(&params);
    for y in [-3.0, -1.0, 0.0, 2.5] {
        let class = classify_orbit(&params, CylinderPoint::new(-4.5, y), 50, eps);
        assert_eq!(class.tag, OrbitTag::BakerEscape);
    }
    let near = CylinderPoint::from_complex(params.log_c() + 1e-3);
    assert_eq!(classify_orbit(&params, near, 50, eps).tag, OrbitTag::AttractedToLogC);
}

#[test]
fn classifier_examples() {
    let params = p(2, 2.0, 0.0);
    let eps = default_basin_radius(&params);
    let fixed = classify_orbit(&params, CylinderPoint::from_complex(params.log_c()), 10, eps);
    assert_eq!((fixed.tag, fixed.iterations_used), (OrbitTag::AttractedToLogC, 0));
    let left = classify_orbit(&params, CylinderPoint::new(-6.0, 1.0), 10, eps);
    assert_eq!((left.tag, left.iterations_used), (OrbitTag::BakerEscape, 0));
    // the critical point log ℓ lies in the immediate basin of log c
    let p3 = p(3, 2.7, 0.2);
    let crit = classify_orbit(&p3, CylinderPoint::new(3f64.ln(), 0.0), 500, default_basin_radius(&p3));
    assert_eq!(crit.tag, OrbitTag::AttractedToLogC);
}

proptest! {
    #[test]
    fn lift_independence(params in c_in_disk(2, 0.95), x in -3.0..3.0f64, y in -PI..PI, m in -3i64..=3) {
        let z = CylinderPoint::new(x, y);
        let shifted = CylinderPoint::from_complex(z.lift() + Complex64::new(0.0, TAU * m as f64));
        prop_assert!(evaluate(&params, z).distance(&evaluate(&params, shifted)) < 1e-12 * (1.0 + x.exp()));
    }

    #[test]
    fn conjugation_symmetry(params in c_in_disk(3, 0.95), x in -3.0..3.0f64, y in -PI..PI) {
        let z = CylinderPoint::new(x, y);
        let a = evaluate(&params.conj(), z.conj());
        let b = evaluate(&params, z).conj();
        prop_assert!(a.distance(&b) < 1e-12 * (1.0 + x.exp()));
    }

    #[test]
    fn multiplier_law(params in c_in_disk(2, 0.9), x in -1.0..1.5f64, y in -PI..PI, n in 1usize..4, m in 1usize..4) {
        let z = CylinderPoint::new(x, y);
        let whole = orbit_derivative(&params, z, n + m);
        prop_assume!(whole.modulus() < 1e200);
        let split = orbit_derivative(&params, z, n).mul(orbit_derivative(&params, iterate(&params, z, n), m).to_complex());
        let scale = whole.modulus().max(1.0);
        prop_assert!((whole.to_complex() - split.to_complex()).norm() <= 1e-9 * scale);
    }

    #[test]
    fn fixed_point_suite(ell in 2u32..=3, rho in 0.0..0.95f64, a in 0.0..TAU) {
        let c = f64::from(ell) + Complex64::from_polar(rho, a);
        let params = MapParams::new(ell, c).unwrap();
        let z = CylinderPoint::from_complex(c.ln());
        prop_assert!(evaluate(&params, z).distance(&z) < 1e-12);
        prop_assert!((derivative(&params, z) - (f64::from(ell) - c)).norm() < 1e-12);
    }
}
