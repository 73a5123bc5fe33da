//! Branch-indexed preimages `F_c^{-1}(w)` on the cylinder.
//!
//! A preimage `x` of `[w]` solves `ℓx − e^x = B_k` with
//! `B_k = w + 2πik − c + (ℓ−1)·Log c` for exactly one lift index `k`. For
//! `|k|` beyond a few units there is exactly one solution in the strip, at
//! `Re x ≈ log(2π|k|)`; small indices can carry a second solution near the
//! critical line, which is told apart by a sheet number.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{derivative, evaluate, CylinderPoint, MapParams};
use crate::error::{Error, Result};
use crate::roots::{self, LinExp};

/// Default residual tolerance for validated preimages.
pub const DEFAULT_TOL: f64 = 1e-11;
/// Default geometric constant in the tail bound.
pub const DEFAULT_C_GEO: f64 = 2.0;
/// Separation of target pairs in inverse-branch contraction checks.
pub const DEFAULT_DELTA_NUM: f64 = 0.1;
/// Right edge of the region where small-index preimages are sought.
pub const DEFAULT_M0: f64 = 8.0;

/// One letter of an inverse-branch word: lift index `k` and, when the
/// equation has several solutions on the strip for that `k`, which one
/// (0 = largest real part).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Branch {
    pub k: i64,
    pub sheet: u8,
}

impl Branch {
    pub const fn main(k: i64) -> Self {
        Self { k, sheet: 0 }
    }
}

impl From<i64> for Branch {
    fn from(k: i64) -> Self {
        Self::main(k)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sheet == 0 {
            write!(f, "{}", self.k)
        } else {
            write!(f, "{}.{}", self.k, self.sheet)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageEntry {
    pub branch: Branch,
    pub x: CylinderPoint,
    /// `F_c'(x) = ℓ − e^x`.
    pub deriv: Complex64,
    /// `d(F_c(x), w)`.
    pub residual: f64,
}

/// Validated preimages of `target` over lift indices `|k| ≤ k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreimageSet {
    pub target: CylinderPoint,
    /// Sorted by `|k|`, then `Re x`.
    pub branches: Vec<PreimageEntry>,
    pub k_max: i64,
    pub tol: f64,
    /// Lift indices without any validated solution.
    pub misses: Vec<i64>,
    /// `max 2π|k| / |F'(x_k)|` over `|k| ≥ K_min`; `None` if `k_max < K_min`.
    pub derivative_ratio: Option<f64>,
}

impl PreimageSet {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn get(&self, branch: Branch) -> Option<&PreimageEntry> {
        self.branches.iter().find(|e| e.branch == branch)
    }

    /// Whether every branch with `|k| ≥ K_min` satisfies
    /// `|F'(x_k)| ≥ 2π|k| / c_geo`.
    pub fn derivative_bound_holds(&self, c_geo: f64) -> bool {
        self.derivative_ratio.map_or(true, |r| r <= c_geo)
    }

    /// Whether the closed-form [`tail_weight_bound`] is certified at `t`:
    /// it needs `(2π|k| / |F'(x_k)|)^t ≤ c_geo` on the measured branches.
    pub fn tail_bound_certified(&self, t: f64, c_geo: f64) -> bool {
        self.derivative_ratio.map_or(false, |r| r.powf(t) <= c_geo)
    }
}

/// Smallest `K` from which the asymptotic derivative bound is quoted.
pub fn k_min(params: &MapParams) -> i64 {
    let l = params.ell_f64();
    let raw = (params.c().norm() + l * (DEFAULT_M0 + PI) + TAU) / TAU;
    (raw.ceil() as i64).max(10)
}

/// Lift indices above which the strip holds a single preimage, reachable
/// by the logarithmic fixed-point iteration.
pub fn simple_branch_threshold(params: &MapParams) -> i64 {
    2 * i64::from(params.ell()) + 3
}

/// Lift indices above which preimages of `w` are taken from the
/// logarithmic iteration instead of the full branch enumeration. Extra
/// solutions need `|B_k|` comparable to `|w − offset|`, so the cutoff grows
/// with `|w|`.
pub fn enumeration_cutoff(params: &MapParams, w: CylinderPoint) -> i64 {
    let base = w.lift() - params.offset();
    simple_branch_threshold(params).max((base.norm() / TAU).ceil() as i64 + 2)
}

/// All validated preimages of `w` with lift index in `[−k_max, k_max]`.
pub fn preimages(params: &MapParams, w: CylinderPoint, k_max: i64, tol: f64) -> Result<PreimageSet> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTol(tol));
    }
    if k_max < 1 {
        return Err(Error::InvalidArgument(format!("K must be >= 1, got {k_max}")));
    }
    let base = w.lift() - params.offset();
    let cutoff = enumeration_cutoff(params, w);
    let mut roots = roots::strip_roots(params.ell(), base, k_max.min(cutoff));
    for k in (cutoff + 1)..=k_max {
        for k in [k, -k] {
            let eq = LinExp { slope: params.ell_f64(), rhs: base + Complex64::new(0.0, TAU * k as f64) };
            if let Some(x) = eq.log_regime(None) {
                roots.push(roots::StripRoot { k, x });
            }
        }
    }
    roots.sort_by(|a, b| a.k.abs().cmp(&b.k.abs()).then(a.x.re.total_cmp(&b.x.re)).then(a.k.cmp(&b.k)));
    let kmin = k_min(params);
    let mut branches = Vec::with_capacity(roots.len());
    let mut ratio: Option<f64> = None;
    for r in &roots {
        let x = snap_critical(params, CylinderPoint::from_complex(r.x), w, tol);
        let residual = evaluate(params, x).distance(&w);
        if residual >= tol {
            continue;
        }
        let deriv = derivative(params, x);
        if r.k.abs() >= kmin {
            let q = TAU * r.k.abs() as f64 / deriv.norm();
            ratio = Some(ratio.map_or(q, |m: f64| m.max(q)));
        }
        branches.push(PreimageEntry { branch: Branch::main(r.k), x, deriv, residual });
    }
    assign_sheets(&mut branches);
    let misses = (-k_max..=k_max).filter(|k| !branches.iter().any(|e| e.branch.k == *k)).collect();
    Ok(PreimageSet { target: w, branches, k_max, tol, misses, derivative_ratio: ratio })
}

/// A root next to the critical point `log ℓ` is a double root when `w` is
/// the critical value; Newton only reaches it to `√ε`, so it is replaced by
/// the critical point itself.
fn snap_critical(params: &MapParams, x: CylinderPoint, w: CylinderPoint, tol: f64) -> CylinderPoint {
    let crit = CylinderPoint::new(params.ell_f64().ln(), 0.0);
    if x.distance(&crit) < 1e-3 && evaluate(params, crit).distance(&w) < tol {
        crit
    } else {
        x
    }
}

/// Numbers solutions sharing a lift index by decreasing real part.
fn assign_sheets(entries: &mut [PreimageEntry]) {
    // entries are sorted by |k| then Re, so equal k are adjacent only per sign;
    // count directly instead.
    for i in 0..entries.len() {
        let k = entries[i].branch.k;
        let re = entries[i].x.re();
        let higher = entries.iter().filter(|e| e.branch.k == k && e.x.re() > re).count();
        entries[i].branch.sheet = higher as u8;
    }
}

/// The preimage of `w` on a single branch.
pub fn branch_preimage(params: &MapParams, w: CylinderPoint, branch: Branch) -> Option<CylinderPoint> {
    let base = w.lift() - params.offset();
    if branch.sheet == 0 && branch.k.abs() > enumeration_cutoff(params, w) {
        let eq = LinExp { slope: params.ell_f64(), rhs: base + Complex64::new(0.0, TAU * branch.k as f64) };
        let x = eq.log_regime(None)?;
        return Some(CylinderPoint::from_complex(x));
    }
    let mut same_k: Vec<Complex64> =
        roots::strip_roots(params.ell(), base, branch.k.abs()).into_iter().filter(|r| r.k == branch.k).map(|r| r.x).collect();
    same_k.sort_by(|a, b| b.re.total_cmp(&a.re));
    same_k.get(usize::from(branch.sheet)).map(|x| CylinderPoint::from_complex(*x))
}

/// Follows the inverse branches `word[0], word[1], …` starting from `w`:
/// the result `x` satisfies `F^n(x) = w` with `n = word.len()`.
pub fn inverse_branch(params: &MapParams, w: CylinderPoint, word: &[Branch], tol: f64) -> Result<CylinderPoint> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("empty branch word".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidTol(tol));
    }
    let mut x = w;
    for (depth, b) in word.iter().enumerate() {
        let next = branch_preimage(params, x, *b).ok_or(Error::BranchMiss { k: b.k, depth: depth + 1 })?;
        if evaluate(params, next).distance(&x) >= tol {
            return Err(Error::BranchMiss { k: b.k, depth: depth + 1 });
        }
        x = next;
    }
    Ok(x)
}

/// Closed-form bound on the omitted weight `Σ_{|k|>K} |F'(x_k)|^{-t}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub k: i64,
    pub t: f64,
    pub bound: f64,
}

/// `2·C_geo·(2π)^{−t}·K^{1−t}/(t−1)`.
pub fn tail_weight_bound(k: i64, t: f64, c_geo: f64) -> Result<TailBound> {
    if !(t > 1.0) {
        return Err(Error::TNotSummable(t));
    }
    if k < 1 {
        return Err(Error::InvalidArgument(format!("K must be >= 1, got {k}")));
    }
    let kf = k as f64;
    let bound = 2.0 * c_geo * TAU.powf(-t) * kf.powf(1.0 - t) / (t - 1.0);
    Ok(TailBound { k, t, bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p22() -> MapParams {
        MapParams::new(2, Complex64::new(2.0, 0.0)).unwrap()
    }

    #[test]
    fn fixed_point_is_own_preimage() {
        let p = p22();
        let w = CylinderPoint::from_complex(p.log_c());
        let set = preimages(&p, w, 10, DEFAULT_TOL).unwrap();
        assert!(set.branches.iter().any(|e| e.x.distance(&w) < 1e-7));
        for e in &set.branches {
            assert!(e.residual < DEFAULT_TOL);
        }
    }

    #[test]
    fn entries_sorted_and_separated() {
        let p = MapParams::new(3, Complex64::new(2.7, -0.2)).unwrap();
        let w = CylinderPoint::new(0.4, 2.0);
        let set = preimages(&p, w, 25, DEFAULT_TOL).unwrap();
        for pair in set.branches.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!(a.branch.k.abs() < b.branch.k.abs() || (a.branch.k.abs() == b.branch.k.abs() && a.x.re() <= b.x.re()));
        }
        for (i, a) in set.branches.iter().enumerate() {
            for b in &set.branches[i + 1..] {
                assert!(a.x.distance(&b.x) > 10.0 * set.tol);
            }
            assert!((a.deriv - derivative(&p, a.x)).norm() < 1e-12 * (1.0 + a.deriv.norm()));
        }
        assert!(set.misses.is_empty(), "{:?}", set.misses);
    }

    #[test]
    fn large_index_asymptotics() {
        let p = p22();
        let w = CylinderPoint::from_complex(p.log_c());
        let x = branch_preimage(&p, w, Branch::main(100)).unwrap();
        assert!((x.re() - (TAU * 100.0).ln()).abs() < 0.1);
    }

    #[test]
    fn tail_bound_closed_form() {
        let b = tail_weight_bound(100, 2.0, 2.0).unwrap();
        let expect = 2.0 * 2.0 / (TAU * TAU) / 100.0;
        assert!((b.bound - expect).abs() < 1e-18);
        assert!((b.bound - 1.013e-3).abs() < 1e-6);
        assert!(tail_weight_bound(200, 2.0, 2.0).unwrap().bound < b.bound);
        assert_eq!(tail_weight_bound(100, 1.0, 2.0), Err(Error::TNotSummable(1.0)));
    }

    #[test]
    fn single_branch_matches_enumeration() {
        let p = MapParams::new(2, Complex64::new(2.1, 0.3)).unwrap();
        let w = CylinderPoint::new(1.2, -0.4);
        let set = preimages(&p, w, 12, DEFAULT_TOL).unwrap();
        for e in &set.branches {
            let x = inverse_branch(&p, w, &[e.branch], DEFAULT_TOL).unwrap();
            assert!(x.distance(&e.x) < 1e-9, "{:?}", e.branch);
        }
    }

    #[test]
    fn fast_path_matches_full_enumeration() {
        let p = MapParams::new(2, Complex64::new(2.2, -0.4)).unwrap();
        for w in [CylinderPoint::new(-3.5, 1.0), CylinderPoint::new(0.7, 3.1), CylinderPoint::new(12.0, -2.0), CylinderPoint::new(60.0, 0.5)] {
            let fast = preimages(&p, w, 40, DEFAULT_TOL).unwrap();
            let base = w.lift() - p.offset();
            let full = roots::strip_roots(2, base, 40);
            assert_eq!(fast.len(), full.len(), "{w:?}");
            for r in &full {
                assert!(fast.branches.iter().any(|e| e.branch.k == r.k && roots::strip_distance(e.x.lift(), r.x) < 1e-9), "{w:?} {r:?}");
            }
        }
    }

    #[test]
    fn k_min_default() {
        assert_eq!(k_min(&p22()), 10);
    }

    #[test]
    fn rejects_bad_input() {
        let p = p22();
        let w = CylinderPoint::new(0.0, 0.0);
        assert!(matches!(preimages(&p, w, 5, 0.0), Err(Error::InvalidTol(_))));
        assert!(inverse_branch(&p, w, &[], 1e-9).is_err());
    }
}

/// Preimages of `w` with `Re x` in `re_range` and lift index `|k| ≤ k_max`,
/// found by plain Newton on `F(x) = w` from every point of a rectangular
/// seed grid with the given spacing. Where `F'` nearly vanishes, Newton on
/// `F' = 0` locates the double root. Independent of the branch
/// enumeration; used to cross-check it.
pub fn seed_grid_preimages(
    params: &MapParams,
    w: CylinderPoint,
    re_range: (f64, f64),
    k_max: i64,
    spacing: f64,
    tol: f64,
) -> Result<Vec<CylinderPoint>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("seed spacing must be positive, got {spacing}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidTol(tol));
    }
    let nx = ((re_range.1 - re_range.0) / spacing).floor() as usize + 1;
    let ny = (TAU / spacing).ceil() as usize;
    let mut found: Vec<CylinderPoint> = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let mut x = Complex64::new(re_range.0 + i as f64 * spacing, -PI + (j as f64 + 0.5) * spacing);
            for _ in 0..60 {
                let g = params.lift(x) - w.lift();
                let g = Complex64::new(g.re, crate::dynamics::canonical_im(g.im));
                let step = g / (params.ell_f64() - x.exp());
                if !step.is_finite() {
                    break;
                }
                x -= step;
                if step.norm() < 1e-15 * (1.0 + x.norm()) {
                    break;
                }
            }
            if (params.ell_f64() - x.exp()).norm() < 1e-3 {
                let mut y = x;
                for _ in 0..20 {
                    y -= (params.ell_f64() - y.exp()) / -y.exp();
                }
                if evaluate(params, CylinderPoint::from_complex(y)).distance(&w) < tol {
                    x = y;
                }
            }
            let p = CylinderPoint::from_complex(x);
            if !p.is_finite() || evaluate(params, p).distance(&w) >= tol {
                continue;
            }
            if p.re() < re_range.0 || p.re() > re_range.1 {
                continue;
            }
            let x = p.lift();
            let k = ((params.ell_f64() * x - x.exp() - w.lift() + params.offset()).im / TAU).round() as i64;
            if k.abs() > k_max {
                continue;
            }
            if !found.iter().any(|q| q.distance(&p) < 1e-7) {
                found.push(p);
            }
        }
    }
    found.sort_by(|a, b| a.re().total_cmp(&b.re()).then(a.im().total_cmp(&b.im())));
    Ok(found)
}
