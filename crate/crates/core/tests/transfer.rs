use bowen_dim::dynamics::{fixed_points, repelling_fixed_point};
use bowen_dim::preimage::preimages;
use bowen_dim::transfer::{
    apply_transfer, conformal_atoms, default_base_point, eigenfunction_iterate_with, iterate_transfer_one, pressure_ratio_with,
    transfer_sums, zeta_pressure, TreeConfig,
};
use bowen_dim::{CylinderPoint, MapParams};
use num_complex::Complex64;

fn p22() -> MapParams {
    MapParams::new(2, Complex64::new(2.0, 0.0)).unwrap()
}

/// `Σ_{|k1|,|k2| ≤ K} |F'(x_{k1})|^{-t}·|F'(x_{k1 k2})|^{-t}` by direct
/// double loop.
fn brute_s2(params: &MapParams, t: f64, z: CylinderPoint, k: i64) -> f64 {
    let mut total = 0.0;
    for a in &preimages(params, z, k, 1e-11).unwrap().branches {
        let wa = a.deriv.norm().powf(-t);
        for b in &preimages(params, a.x, k, 1e-11).unwrap().branches {
            total += wa * b.deriv.norm().powf(-t);
        }
    }
    total
}

#[test]
fn apply_is_linear() {
    let params = p22();
    let z = CylinderPoint::new(1.0, 0.4);
    let g1 = |x: CylinderPoint| x.im().cos();
    let g2 = |x: CylinderPoint| 1.0 / (1.0 + x.re() * x.re());
    let a = apply_transfer(&params, 1.5, g1, 1.0, z, 20).unwrap();
    let b = apply_transfer(&params, 1.5, g2, 1.0, z, 20).unwrap();
    let ab = apply_transfer(&params, 1.5, |x| 2.0 * g1(x) - 3.0 * g2(x), 5.0, z, 20).unwrap();
    assert!((ab.value - (2.0 * a.value - 3.0 * b.value)).abs() < 1e-12);
}

#[test]
fn depth_one_is_one_application() {
    let params = p22();
    let z = CylinderPoint::new(0.5, -2.0);
    let once = apply_transfer(&params, 1.7, |_| 1.0, 1.0, z, 30).unwrap();
    let tree = iterate_transfer_one(&params, 1.7, z, 1, 30, 0.0).unwrap();
    assert!((once.value - tree.value).abs() < 1e-13 * once.value);
}

#[test]
fn second_level_against_brute_force() {
    let params = p22();
    let t = 1.5;
    let z = default_base_point(&params).unwrap();
    let s100 = brute_s2(&params, t, z, 100);
    let s200 = brute_s2(&params, t, z, 200);
    // omitted weight decays like K^{1−t}
    let r = 2f64.powf(t - 1.0);
    let limit = (r * s200 - s100) / (r - 1.0);
    let bound = transfer_sums(&params, t, z, 2, &TreeConfig::bound(7, 0.0)).unwrap().levels[1];
    assert!(bound.lo() <= s200 && limit <= bound.hi(), "{bound:?} vs {s200}, {limit}");
    let quad = transfer_sums(&params, t, z, 2, &TreeConfig::quadrature(7, 0.0, 8)).unwrap().levels[1];
    let extrapolation = (limit - s200).abs();
    assert!((quad.value - limit).abs() <= quad.error + extrapolation, "{quad:?} vs {limit}");
    assert!(quad.error < bound.error);
}

#[test]
fn decays_to_the_right() {
    let params = p22();
    let at = |x: f64| apply_transfer(&params, 1.5, |_| 1.0, 1.0, CylinderPoint::new(x, 0.0), 2000).unwrap();
    let (a, b, c) = (at(2.0), at(10.0), at(20.0));
    assert!(a.lo() > b.hi() && b.lo() > c.hi(), "{a:?} {b:?} {c:?}");
}

#[test]
fn ratio_pressure_decreases_in_t() {
    let params = p22();
    let z = default_base_point(&params).unwrap();
    let cfg = TreeConfig::quadrature(7, 1e-6, 4);
    let ps: Vec<_> = [1.3, 1.6, 2.0].iter().map(|t| pressure_ratio_with(&params, *t, z, 3, &cfg).unwrap()).collect();
    for w in ps.windows(2) {
        assert!(w[0].value - w[0].uncertainty > w[1].value + w[1].uncertainty);
    }
}

#[test]
fn zeta_period_one_is_fixed_point_sum() {
    let params = p22();
    let t = 1.5;
    let report = zeta_pressure(&params, t, 1, 10).unwrap();
    let direct: f64 = fixed_points(&params, -10..=10, 1e-11)
        .unwrap()
        .points
        .iter()
        .filter(|p| p.multiplier.norm() > 1.0)
        .map(|p| p.multiplier.norm().powf(-t))
        .sum();
    assert!((report.sum - direct).abs() < 1e-12);
    assert!((report.estimate.value - direct.ln()).abs() < 1e-12);
}

#[test]
fn zeta_intervals_nest_in_k() {
    let params = p22();
    let a = zeta_pressure(&params, 1.5, 1, 30).unwrap().estimate;
    let b = zeta_pressure(&params, 1.5, 1, 100).unwrap().estimate;
    assert!(b.uncertainty < a.uncertainty);
    assert!((a.value - b.value).abs() <= a.uncertainty + b.uncertainty);
}

#[test]
fn eigenfunction_iteration_settles() {
    let params = p22();
    let samples = [
        default_base_point(&params).unwrap(),
        repelling_fixed_point(&params, 2).unwrap().point,
        CylinderPoint::new(0.5, 1.0),
        CylinderPoint::new(3.0, -2.0),
    ];
    let cfg = TreeConfig::quadrature(7, 1e-7, 4);
    let report = eigenfunction_iterate_with(&params, 1.5, &samples, 5, &cfg).unwrap();
    assert_eq!(report.history.len(), 5);
    assert!(report.changes.last().unwrap() < &report.changes[0]);
    // residuals shrink geometrically, roughly by the spectral gap
    for w in report.residuals.windows(2) {
        assert!(w[1] < 0.6 * w[0], "{:?}", report.residuals);
    }
    assert!(report.samples.values.iter().all(|v| *v > 0.0));
    assert_eq!(report.samples.values[0], 1.0);
}

#[test]
fn atoms_are_normalized() {
    let params = p22();
    let base = default_base_point(&params).unwrap();
    let nu = conformal_atoms(&params, 1.5, 0.0, base, 3, 7, 1e-9).unwrap();
    assert!((nu.total() - 1.0).abs() < 1e-12);
    let zero = conformal_atoms(&params, 1.5, 0.0, base, 0, 7, 1e-9).unwrap();
    assert_eq!(zero.atoms, vec![(base, 1.0)]);
}
