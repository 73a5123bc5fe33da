//! Roots of `s·x − e^x = b` for a positive integer `s`.
//!
//! Every root in `ℂ` has the form `x = b/s − W_m(−e^{b/s}/s)` for exactly
//! one branch `m` of the Lambert W function, so enumerating branches
//! enumerates roots. Translating a root by `2πij` solves the equation with
//! `b` replaced by `b + 2πisj`, which is how strip representatives pick up
//! their lift index.

use std::f64::consts::{E, PI, TAU};

use num_complex::Complex64;

use crate::dynamics::canonical_im;

/// Two candidates closer than this are the same root. Newton only reaches
/// about `1e-8` at a double root, distinct simple roots sit much further
/// apart.
pub const MERGE_RADIUS: f64 = 1e-6;

const HALLEY_MAX_ITER: usize = 64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Halley iteration for `w·e^w = z` from `w0`.
fn halley(z: Complex64, mut w: Complex64) -> Option<Complex64> {
    for _ in 0..HALLEY_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if !denom.is_finite() || denom.norm() == 0.0 {
            return None;
        }
        let dw = f / denom;
        if !dw.is_finite() {
            return None;
        }
        w -= dw;
        if dw.norm() <= 4.0 * f64::EPSILON * (1.0 + w.norm()) {
            break;
        }
    }
    w.is_finite().then_some(w)
}

/// Initial guesses for `W_m(z)`. Branches `−1, 0, 1` get several, since
/// near the branch point `−1/e` and near `0` the sheets are hard to tell
/// apart from a single guess.
fn lambert_seeds(m: i64, z: Complex64) -> Vec<Complex64> {
    let mut seeds = Vec::with_capacity(12);
    let l1 = z.ln() + c(0.0, TAU * m as f64);
    if l1.norm() > 0.0 {
        let l2 = l1.ln();
        let asy = l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1);
        if asy.is_finite() {
            seeds.push(asy);
        }
    }
    if m.abs() <= 1 {
        let p = (2.0 * (E * z + 1.0)).sqrt();
        let s1 = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        let s2 = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p;
        seeds.extend([s1, s2, (1.0 + z).ln(), z]);
        for im in [-5.0, -2.5, 2.5, 5.0] {
            seeds.push(c(-1.0, im));
            seeds.push(l1.re + c(0.0, im));
        }
    }
    seeds.retain(|s| s.is_finite());
    seeds
}

/// Roots of `w·e^w = z` reachable from the seeds of branch `m`.
fn lambert_candidates(m: i64, z: Complex64) -> Vec<Complex64> {
    lambert_seeds(m, z).into_iter().filter_map(|s| halley(z, s)).collect()
}

/// A single cheap guess for `W_m(z)`, good away from the branch point.
fn lambert_quick_seed(m: i64, z: Complex64) -> Complex64 {
    if m == 0 && z.norm() < 1.0 {
        return (1.0 + z).ln();
    }
    let l1 = z.ln() + c(0.0, TAU * m as f64);
    let l2 = l1.ln();
    l1 - l2 + l2 / l1
}

/// The equation `slope·x − e^x = rhs`.
#[derive(Clone, Copy, Debug)]
pub struct LinExp {
    pub slope: f64,
    pub rhs: Complex64,
}

impl LinExp {
    pub fn residual(&self, x: Complex64) -> Complex64 {
        self.slope * x - x.exp() - self.rhs
    }

    /// Newton polish; returns `None` if the iteration leaves the finite
    /// plane or ends with a residual larger than `accept` (relative to
    /// `1 + |rhs|`).
    pub fn newton(&self, mut x: Complex64, iters: usize, accept: f64) -> Option<Complex64> {
        for _ in 0..iters {
            let ex = x.exp();
            let g = self.slope * x - ex - self.rhs;
            let dg = self.slope - ex;
            if dg.norm() == 0.0 {
                break;
            }
            let dx = g / dg;
            if !dx.is_finite() {
                return None;
            }
            x -= dx;
            if dx.norm() <= 4.0 * f64::EPSILON * (1.0 + x.norm()) {
                break;
            }
        }
        let scale = 1.0 + self.rhs.norm() + self.slope * x.norm();
        (x.is_finite() && self.residual(x).norm() <= accept * scale).then_some(x)
    }

    /// Root of the branch that behaves like `Log(−rhs)` for large `|rhs|`:
    /// fixed-point iteration `x ← Log(slope·x − rhs)`, then Newton.
    pub fn log_regime(&self, x0: Option<Complex64>) -> Option<Complex64> {
        let mut x = x0.unwrap_or_else(|| (-self.rhs).ln());
        for _ in 0..200 {
            let next = (self.slope * x - self.rhs).ln();
            let step = (next - x).norm();
            x = next;
            if !x.is_finite() {
                return None;
            }
            if step < 1e-10 * (1.0 + x.norm()) {
                break;
            }
        }
        self.newton(x, 8, 1e-9)
    }

    /// Every root `x = rhs/slope − W_m(−e^{rhs/slope}/slope)` for branches
    /// `m` in `branches`, deduplicated.
    pub fn roots_for_branches(&self, branches: std::ops::RangeInclusive<i64>) -> Vec<Complex64> {
        let shift = self.rhs / self.slope;
        let arg = -shift.exp() / self.slope;
        let mut out: Vec<Complex64> = Vec::new();
        if !(arg.is_finite() && arg.norm() > 0.0) {
            // e^{rhs/slope} under/overflowed: fall back to direct seeds.
            out.extend([shift, (-self.rhs).ln()].into_iter().filter_map(|seed| self.newton(seed, 100, 1e-9)));
            dedup_by_im(&mut out, |x| *x, false);
            return out;
        }
        // One seed per branch first; every branch carries exactly one root,
        // so a short count means some seed landed on a neighbouring branch.
        let count = (branches.end() - branches.start() + 1).max(0) as usize;
        for m in branches.clone() {
            out.extend(halley(arg, lambert_quick_seed(m, arg)).and_then(|w| self.newton(shift - w, 6, 1e-9)));
        }
        dedup_by_im(&mut out, |x| *x, false);
        if out.len() >= count {
            return out;
        }
        for m in branches {
            out.extend(lambert_candidates(m, arg).into_iter().filter_map(|w| self.newton(shift - w, 6, 1e-9)));
        }
        dedup_by_im(&mut out, |x| *x, false);
        out
    }
}

/// Removes points within `MERGE_RADIUS` of an earlier one, comparing
/// only neighbours in the order of `Im` (and the wrap-around pair when
/// `wrap` is set, for strip representatives).
fn dedup_by_im<T>(items: &mut Vec<T>, point: impl Fn(&T) -> Complex64, wrap: bool) {
    items.sort_by(|a, b| point(a).im.total_cmp(&point(b).im));
    let mut keep: Vec<T> = Vec::with_capacity(items.len());
    for item in items.drain(..) {
        let x = point(&item);
        let dup = keep
            .iter()
            .rev()
            .take_while(|y| x.im - point(y).im < MERGE_RADIUS)
            .any(|y| (point(y) - x).norm() < MERGE_RADIUS);
        if !dup {
            keep.push(item);
        }
    }
    if wrap {
        // Strip ends: Im near −π and near π are neighbours on the cylinder.
        let mut i = 0;
        while i < keep.len() {
            let x = point(&keep[i]);
            if x.im > -PI + MERGE_RADIUS {
                break;
            }
            let dup = keep.iter().rev().take_while(|y| point(y).im > PI - MERGE_RADIUS).any(|y| strip_distance(point(y), x) < MERGE_RADIUS);
            if dup {
                keep.remove(i);
            } else {
                i += 1;
            }
        }
    }
    *items = keep;
}

/// A root reduced into the strip `Im ∈ (−π, π]`, with the lift index `k`
/// of the equation it solves there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripRoot {
    pub k: i64,
    pub x: Complex64,
}

/// All strip roots of `slope·x − e^x = base + 2πik` over `|k| ≤ k_max`.
///
/// `slope` must be a positive integer. Output is sorted by `|k|`, then by
/// `Re x`.
pub fn strip_roots(slope: u32, base: Complex64, k_max: i64) -> Vec<StripRoot> {
    assert!(slope >= 1);
    let s = f64::from(slope);
    let mut out: Vec<StripRoot> = Vec::new();
    for r in 0..i64::from(slope) {
        let rhs = base + c(0.0, TAU * r as f64);
        let eq = LinExp { slope: s, rhs };
        // A root on branch m lands near lift index −Im(base)/2π + slope·m.
        let centre = base.im / TAU;
        let m_lo = ((-(k_max as f64) + centre) / s).floor() as i64 - 2;
        let m_hi = ((k_max as f64 + centre) / s).ceil() as i64 + 2;
        for x in eq.roots_for_branches(m_lo..=m_hi) {
            let y = canonical_im(x.im);
            let j = ((x.im - y) / TAU).round() as i64;
            let k = r - i64::from(slope) * j;
            if k.abs() > k_max {
                continue;
            }
            out.push(StripRoot { k, x: c(x.re, y) });
        }
    }
    dedup_by_im(&mut out, |r| r.x, true);
    out.sort_by(|a, b| a.k.abs().cmp(&b.k.abs()).then(a.x.re.total_cmp(&b.x.re)).then(a.k.cmp(&b.k)));
    out
}

/// Cylinder distance between two lifts.
pub fn strip_distance(a: Complex64, b: Complex64) -> f64 {
    (a.re - b.re).hypot(canonical_im(a.im - b.im))
}

/// The unique root on the strip for a large lift index, continued to real
/// (non-integer) index `s`: solves `slope·x − e^x = base + 2πis`.
pub fn far_branch(slope: f64, base: Complex64, s: f64) -> Option<Complex64> {
    let eq = LinExp { slope, rhs: base + c(0.0, TAU * s) };
    eq.log_regime(None)
}

/// Bound on `|Im|` that keeps `x` inside the closed strip.
pub fn in_closed_strip(x: Complex64) -> bool {
    x.im > -PI - 1e-12 && x.im <= PI + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_principal_real() {
        // W_0(1) = Ω ≈ 0.5671432904097838
        let w = lambert_candidates(0, c(1.0, 0.0));
        assert!(w.iter().any(|w| (w - c(0.567_143_290_409_783_8, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn lambert_branch_point() {
        let w = lambert_candidates(0, c(-1.0 / E, 0.0));
        assert!(w.iter().any(|w| (w + 1.0).norm() < 1e-6));
    }

    #[test]
    fn lambert_high_branch_solves() {
        for m in [-7, -2, 2, 9] {
            let z = c(0.3, -1.7);
            let ws = lambert_candidates(m, z);
            assert!(!ws.is_empty());
            for w in ws {
                assert!((w * w.exp() - z).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn log_regime_matches_newton() {
        let eq = LinExp { slope: 2.0, rhs: c(0.4, TAU * 40.0) };
        let x = eq.log_regime(None).unwrap();
        assert!(eq.residual(x).norm() < 1e-10);
        assert!(x.im.abs() < PI);
        assert!((x.re - (TAU * 40.0f64).ln()).abs() < 0.1);
    }

    #[test]
    fn strip_roots_are_roots() {
        let base = c(-1.3, 0.7);
        for slope in [1, 2, 3] {
            let roots = strip_roots(slope, base, 12);
            assert!(roots.len() >= 20);
            for r in roots {
                let eq = LinExp { slope: f64::from(slope), rhs: base + c(0.0, TAU * r.k as f64) };
                assert!(eq.residual(r.x).norm() < 1e-9, "{r:?}");
                assert!(r.x.im > -PI && r.x.im <= PI);
            }
        }
    }
}
