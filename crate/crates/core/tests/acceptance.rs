//! Acceptance checks, one line per criterion. Run with
//! `cargo test --release --test acceptance`.

mod common;

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use bowen_dim::analysis::{
    continue_periodic, expansion_constants, jump_summary, periodic_point_velocity, sweep_dimension, window_parameters, GridSpec,
    ParamDerivative,
};
use bowen_dim::dimension::{bowen_dimension, PressureEstimate, PressureLadder};
use bowen_dim::dynamics::{derivative, evaluate, repelling_fixed_point, PeriodicPoint};
use bowen_dim::preimage::{preimages, tail_weight_bound};
use bowen_dim::transfer::{
    apply_transfer, box_is_injective, conformal_atoms, conformal_defect, default_base_point, pressure_ratio_with, zeta_pressure,
    TestBox, TreeConfig,
};
use bowen_dim::{CylinderPoint, MapParams};
use common::grid_oracle;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn p(ell: u32, re: f64, im: f64) -> MapParams {
    MapParams::new(ell, Complex64::new(re, im)).unwrap()
}

fn est(e: &PressureEstimate) -> String {
    format!("{:.5}±{:.1e}", e.value, e.uncertainty)
}

fn require(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixed_point_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let ell = rng.gen_range(2..=3u32);
        let c = f64::from(ell) + Complex64::from_polar(0.95 * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>());
        let params = MapParams::new(ell, c).map_err(|e| e.to_string())?;
        let z = CylinderPoint::from_complex(c.ln());
        worst = worst.max(evaluate(&params, z).distance(&z));
        worst = worst.max((derivative(&params, z) - (f64::from(ell) - c)).norm());
    }
    require(worst < 1e-12, format!("100 parameters, max error {worst:.1e}"))
}

fn preimage_completeness() -> Check {
    let params = p(2, 2.0, 0.0);
    let w = CylinderPoint::new(2f64.ln(), 0.0);
    let set = preimages(&params, w, 50, 1e-11).map_err(|e| e.to_string())?;
    let right = (100.0 * PI).ln() + 1.0;
    let oracle = grid_oracle(&params, w, (-4.0, right), 50, 0.1);
    let in_box: Vec<_> = set.branches.iter().filter(|e| e.x.re() >= -4.0 && e.x.re() <= right).collect();
    let mut worst: f64 = 0.0;
    for o in &oracle {
        let q = CylinderPoint::from_complex(*o);
        worst = worst.max(in_box.iter().map(|e| e.x.distance(&q)).fold(f64::INFINITY, f64::min));
    }
    require(
        in_box.len() == oracle.len() && worst < 1e-9,
        format!("solver {} / oracle {}, max distance {worst:.1e}", in_box.len(), oracle.len()),
    )
}

fn tail_soundness() -> Check {
    let params = p(2, 2.0, 0.0);
    let mut detail = Vec::new();
    let mut ok = true;
    for w in [CylinderPoint::new(2f64.ln(), 0.0), CylinderPoint::new(0.5, 0.2), CylinderPoint::new(-1.0, -2.5)] {
        let set = preimages(&params, w, 1000, 1e-11).map_err(|e| e.to_string())?;
        for t in [1.5, 2.0] {
            let tail: f64 = set.branches.iter().filter(|e| e.branch.k.abs() > 100).map(|e| e.deriv.norm().powf(-t)).sum();
            let bound = tail_weight_bound(100, t, 2.0).map_err(|e| e.to_string())?.bound;
            ok &= tail <= bound;
            detail.push(format!("w={:.2}{:+.2}i t={t}: {tail:.3e}≤{bound:.3e}", w.re(), w.im()));
        }
    }
    require(ok, detail.join(", "))
}

fn transfer_decay() -> Check {
    let params = p(2, 2.0, 0.0);
    let mut vals = Vec::new();
    for x in [2.0, 10.0, 20.0] {
        vals.push(apply_transfer(&params, 1.5, |_| 1.0, 1.0, CylinderPoint::new(x, 0.0), 2000).map_err(|e| e.to_string())?);
    }
    let ok = vals.windows(2).all(|w| w[0].lo() > w[1].hi());
    let detail = vals.iter().map(|v| format!("{:.4e}±{:.1e}", v.value, v.error)).collect::<Vec<_>>().join(" > ");
    require(ok, format!("L1 at Re 2, 10, 20: {detail}"))
}

fn pressure_properties() -> Check {
    let params = p(2, 2.0, 0.0);
    let cfg = PressureLadder::for_params(&params).rungs.last().copied().unwrap();
    let bases = [repelling_fixed_point(&params, 1).unwrap().point, repelling_fixed_point(&params, 3).unwrap().point];
    let ts = [1.3, 1.5, 1.7, 2.0];
    let at = |base: CylinderPoint| -> Result<Vec<PressureEstimate>, String> {
        ts.iter().map(|t| pressure_ratio_with(&params, *t, base, cfg.n, &cfg.tree).map_err(|e| e.to_string())).collect()
    };
    let a = at(bases[0])?;
    let b = at(bases[1])?;
    let mut fails = Vec::new();
    for w in a.windows(2) {
        if w[0].value - w[0].uncertainty <= w[1].value + w[1].uncertainty {
            fails.push(format!("not decreasing at t={}", w[1].t));
        }
    }
    // midpoint convexity at 1.3/1.5/1.7, and the unequal-spacing form at 1.5/1.7/2.0
    let sum_u = |i: &[usize]| i.iter().map(|&j| a[j].uncertainty).sum::<f64>();
    if a[0].value + a[2].value - 2.0 * a[1].value < -2.0 * sum_u(&[0, 1, 2]) {
        fails.push("convexity at 1.3/1.5/1.7".into());
    }
    let lam = (ts[3] - ts[2]) / (ts[3] - ts[1]);
    if lam * a[1].value + (1.0 - lam) * a[3].value - a[2].value < -2.0 * sum_u(&[1, 2, 3]) {
        fails.push("convexity at 1.5/1.7/2.0".into());
    }
    for (x, y) in a.iter().zip(&b) {
        if (x.value - y.value).abs() > x.uncertainty + y.uncertainty {
            fails.push(format!("base dependence at t={}", x.t));
        }
    }
    let detail = format!(
        "P(k=1 base) = [{}], P(k=3 base) = [{}]",
        a.iter().map(est).collect::<Vec<_>>().join(", "),
        b.iter().map(est).collect::<Vec<_>>().join(", ")
    );
    if fails.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", fails.join("; ")))
    }
}

fn cross_oracle() -> Check {
    let params = p(2, 2.0, 0.0);
    let base = default_base_point(&params).map_err(|e| e.to_string())?;
    let ratio = pressure_ratio_with(&params, 1.5, base, 4, &TreeConfig::quadrature(7, 1e-7, 4)).map_err(|e| e.to_string())?;
    let zeta = zeta_pressure(&params, 1.5, 3, 12).map_err(|e| e.to_string())?.estimate;
    let gap = (ratio.value - zeta.value).abs();
    let allowed = ratio.uncertainty + zeta.uncertainty + 0.05;
    require(gap <= allowed, format!("ratio {} zeta {}, |Δ| {gap:.4} ≤ {allowed:.4}", est(&ratio), est(&zeta)))
}

fn bowen_zero() -> Check {
    let r = bowen_dimension(&p(2, 2.0, 0.0), 5e-3).map_err(|e| e.to_string())?;
    let certified = r.diagnostics["limited_by_truncation"] == 0.0;
    require(
        certified && r.width() < 5e-3 && r.t_star > 1.0 && r.t_star < 2.0,
        format!("t* = {:.5} in [{:.5}, {:.5}], width {:.2e}, {} evaluations", r.t_star, r.bracket.0, r.bracket.1, r.width(), r.evaluations),
    )
}

fn conjugation_symmetry() -> Check {
    let a = bowen_dimension(&p(2, 2.0, 0.3), 5e-3).map_err(|e| e.to_string())?;
    let b = bowen_dimension(&p(2, 2.0, -0.3), 5e-3).map_err(|e| e.to_string())?;
    let gap = (a.t_star - b.t_star).abs();
    let allowed = a.uncertainty + b.uncertainty;
    require(gap <= allowed, format!("t*(2+0.3i) = {:.5}, t*(2-0.3i) = {:.5}, |Δ| {gap:.2e} ≤ {allowed:.2e}", a.t_star, b.t_star))
}

fn continuity() -> Check {
    let spec = GridSpec::segment(Complex64::new(2.0, 0.0), Complex64::new(2.0, 0.2), 5).map_err(|e| e.to_string())?;
    let grid = sweep_dimension(2, &spec, 5e-3).map_err(|e| e.to_string())?;
    let failed = grid.records.iter().filter(|r| r.diagnostics.contains_key("failed") || !r.t_star.is_finite()).count();
    let (max, median) = jump_summary(&grid);
    let ts = grid.records.iter().map(|r| format!("{:.5}", r.t_star)).collect::<Vec<_>>().join(", ");
    require(failed == 0 && max <= 10.0 * median, format!("t* = [{ts}], max jump {max:.2e}, median {median:.2e}, failures {failed}"))
}

fn continuation() -> Check {
    let params = p(2, 2.0, 0.0);
    let start = repelling_fixed_point(&params, 1).ok_or("no repelling fixed point")?;
    let path: Vec<Complex64> = (1..=20).map(|j| Complex64::new(2.0, 0.3 * j as f64 / 20.0)).collect();
    let track = continue_periodic(&params, &start, &path, 1e-12, ParamDerivative::Exact).map_err(|e| e.to_string())?;
    let max_res = track.path.iter().map(|q| q.residual).fold(0.0, f64::max);
    let min_mult = track.path.iter().map(|q| q.multiplier.norm()).fold(f64::INFINITY, f64::min);
    // derivative and Cauchy–Riemann on every fifth step
    let (mut rel, mut cr): (f64, f64) = (0.0, 0.0);
    let h = 1e-5;
    let i = Complex64::new(0.0, 1.0);
    for q in track.path.iter().step_by(5) {
        let here = params.with_c(q.c).map_err(|e| e.to_string())?;
        let from = PeriodicPoint { point: q.z, period: 1, multiplier: derivative(&here, q.z), branch_word: Vec::new() };
        let moved = |dc: Complex64| -> Result<Complex64, String> {
            let t = continue_periodic(&here, &from, &[q.c + dc], 1e-12, ParamDerivative::Exact).map_err(|e| e.to_string())?;
            Ok(t.path[0].z.lift())
        };
        let dx = (moved(Complex64::new(h, 0.0))? - moved(Complex64::new(-h, 0.0))?) / (2.0 * h);
        let dy = (moved(i * h)? - moved(-i * h)?) / (2.0 * h * i);
        let v = periodic_point_velocity(&here, q.z, 1, ParamDerivative::Exact).map_err(|e| e.to_string())?;
        rel = rel.max((v - dx).norm() / v.norm());
        cr = cr.max((dx - dy).norm());
    }
    require(
        track.path.len() == 20 && max_res < 1e-9 && min_mult > 1.0 && rel < 1e-3 && cr < 1e-4,
        format!("residual {max_res:.1e}, min |mult| {min_mult:.3}, derivative rel. error {rel:.1e}, CR {cr:.1e}"),
    )
}

fn expansion() -> Check {
    let params = p(2, 2.0, 0.0);
    let e = expansion_constants(&params, 0.1, 50, 10).map_err(|e| e.to_string())?;
    let mut per = Vec::new();
    for q in window_parameters(&params, 0.1, 5).map_err(|e| e.to_string())? {
        let obs: Vec<_> = e.observations.iter().filter(|o| o.c == q.c()).copied().collect();
        per.push(!obs.is_empty() && e.certifies(&obs));
    }
    require(
        e.kappa > 1.0 && per.iter().all(|x| *x),
        format!("L = {:.4}, κ = {:.4}, {} of 5 parameters certified", e.l, e.kappa, per.iter().filter(|x| **x).count()),
    )
}

fn conformal() -> Check {
    let params = p(2, 2.0, 0.0);
    let t = 1.5;
    let base = repelling_fixed_point(&params, 1).ok_or("no base")?.point;
    let a = TestBox { center: repelling_fixed_point(&params, -1).ok_or("no box")?.point, half_width: 0.1 };
    if !box_is_injective(&params, &a) {
        return Err("test box is not injective".into());
    }
    let defect = |depth: usize| -> Result<f64, String> {
        let prev = conformal_atoms(&params, t, 0.0, base, depth - 1, 7, 1e-9).map_err(|e| e.to_string())?;
        let mut nu = conformal_atoms(&params, t, 0.0, base, depth, 7, 1e-9).map_err(|e| e.to_string())?;
        nu.pressure = (nu.raw_total / prev.raw_total).ln();
        Ok(conformal_defect(&params, &nu, &a))
    };
    let (d3, d6) = (defect(3)?, defect(6)?);
    require(d6 < d3, format!("defect {d3:.3e} at depth 3, {d6:.3e} at depth 6"))
}

fn cli_goldens() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, args: &[&str]| -> Result<Vec<u8>, String> {
        let path = dir.path().join(name);
        let out = path.to_str().unwrap().to_string();
        let argv = ["bowen-dim"].iter().chain(args).copied().chain(["--threads", "1", "--out", out.as_str()]);
        let code = bowen_dim::cli::run(argv, &mut Vec::new(), &mut Vec::new());
        if code != 0 {
            return Err(format!("{} exited with {code}", args[0]));
        }
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let cases: [(&str, &[&str]); 3] = [
        ("preimages.csv", &["preimages", "--ell", "2", "--c", "2+0i", "--K", "50"]),
        ("dim.json", &["dim", "--ell", "2", "--c", "2+0i", "--accuracy", "5e-3"]),
        ("classify.pgm", &["classify", "--ell", "2", "--c", "2+0i", "--res", "64x64"]),
    ];
    let mut detail = Vec::new();
    for (name, args) in cases {
        let first = run(name, args)?;
        let second = run(name, args)?;
        if first != second || first.is_empty() {
            return Err(format!("{name} differs between runs"));
        }
        detail.push(format!("{name} {} bytes", first.len()));
    }
    Ok(format!("identical: {}", detail.join(", ")))
}

fn main() {
    let checks: [(&str, fn() -> Check); 13] = [
        ("fixed-point and multiplier suite", fixed_point_suite),
        ("preimage completeness", preimage_completeness),
        ("tail-bound soundness", tail_soundness),
        ("transfer-operator decay", transfer_decay),
        ("pressure properties", pressure_properties),
        ("cross-oracle pressure agreement", cross_oracle),
        ("Bowen zero", bowen_zero),
        ("conjugation symmetry of dimension", conjugation_symmetry),
        ("continuity probe", continuity),
        ("continuation suite", continuation),
        ("expansion certification", expansion),
        ("conformal-measure defect", conformal),
        ("CLI golden files", cli_goldens),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS  {name} ({secs:.1} s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1} s): {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
