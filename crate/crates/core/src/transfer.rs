//! The transfer operator `L_t g(z) = Σ_{F(x)=z} |F'(x)|^{-t} g(x)` and its
//! iterates on the constant function.
//!
//! Iterates are computed on the breadth-first preimage tree of a base
//! point. Every node keeps the lift indices `|k| ≤ K` exactly; the
//! remaining indices are handled by a [`TailModel`].

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussLaguerre};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{PressureEstimate, PressureMethod};
use crate::dynamics::{canonical_im, derivative, fixed_points, orbit_derivative, repelling_fixed_point, CylinderPoint, MapParams, PeriodicPoint};
use crate::error::{Error, Result};
use crate::preimage::{
    inverse_branch, preimages, simple_branch_threshold, tail_weight_bound, Branch, DEFAULT_C_GEO, DEFAULT_TOL,
};
use crate::roots::LinExp;

/// Default lift-index cutoff for explicit branches.
pub const DEFAULT_K: i64 = 50;
/// Default relative pruning threshold.
pub const DEFAULT_PRUNE: f64 = 1e-14;
/// Default cap on node expansions per tree.
pub const DEFAULT_BUDGET: usize = 5_000_000;
/// Default number of quadrature nodes per side in [`TailModel::Quadrature`].
pub const DEFAULT_QUAD_NODES: usize = 8;
/// Quadrature nodes beyond this continuous index are dropped; their share
/// is charged to the error.
const S_CAP: f64 = 1e100;

/// A nonnegative quantity with an absolute error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedValue {
    pub value: f64,
    pub error: f64,
}

impl WeightedValue {
    pub fn lo(&self) -> f64 {
        self.value - self.error
    }

    pub fn hi(&self) -> f64 {
        self.value + self.error
    }

    pub fn overlaps(&self, other: &WeightedValue) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }
}

/// How the omitted lift indices `|k| > K` of every node are accounted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TailModel {
    /// Omit them and add the closed-form tail bound, times the runtime
    /// estimate of `sup L_t 1` for deeper levels, to the error.
    Bound,
    /// Replace `Σ_{|k|>K}` by `∫_{K+1/2}^∞` over a continuous lift index,
    /// evaluated by Gauss–Laguerre in `log s` with `nodes` points per side.
    /// The quadrature points become children of the node. The error is an
    /// estimate, not a bound.
    Quadrature { nodes: usize },
}

/// Parameters of a preimage-tree expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub k: i64,
    pub prune: f64,
    pub budget: usize,
    pub tail: TailModel,
    pub c_geo: f64,
    pub tol: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            prune: DEFAULT_PRUNE,
            budget: DEFAULT_BUDGET,
            tail: TailModel::Quadrature { nodes: DEFAULT_QUAD_NODES },
            c_geo: DEFAULT_C_GEO,
            tol: DEFAULT_TOL,
        }
    }
}

impl TreeConfig {
    pub fn bound(k: i64, prune: f64) -> Self {
        Self { k, prune, tail: TailModel::Bound, ..Self::default() }
    }

    pub fn quadrature(k: i64, prune: f64, nodes: usize) -> Self {
        Self { k, prune, tail: TailModel::Quadrature { nodes }, ..Self::default() }
    }

    fn validate(&self, params: &MapParams) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument(format!("K must be >= 1, got {}", self.k)));
        }
        if !(self.prune >= 0.0) {
            return Err(Error::InvalidArgument(format!("prune must be >= 0, got {}", self.prune)));
        }
        if let TailModel::Quadrature { nodes } = self.tail {
            if nodes == 0 {
                return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
            }
            let thr = simple_branch_threshold(params);
            if self.k < thr {
                return Err(Error::InvalidArgument(format!("quadrature tail needs K >= {thr}, got {}", self.k)));
            }
        }
        Ok(())
    }
}

/// Per-`t` data for the tail of every node.
struct TailRule {
    t: f64,
    bound: f64,
    /// `(s, factor)`: a child at continuous index `±s` with weight
    /// `factor·|F'(x(s))|^{-t}`.
    points: Vec<(f64, f64)>,
    /// Estimated share of the tail carried by dropped points, both sides.
    dropped: f64,
    /// Relative quadrature error, from comparing two rules on a model.
    rel_err: f64,
    /// Euler–Maclaurin remainder estimate of the sum-to-integral step.
    em_err: f64,
}

fn laguerre(nodes: usize) -> GaussLaguerre {
    let n = NonZeroUsize::new(nodes).expect("nodes > 0");
    GaussLaguerre::new(n, FiniteAboveNegOneF64::new(0.0).expect("0 is a valid alpha"))
}

fn laguerre_points(t: f64, s0: f64, nodes: usize) -> (Vec<(f64, f64)>, f64) {
    let a = t - 1.0;
    let mut pts = Vec::with_capacity(nodes);
    let mut dropped = 0.0;
    for &(y, w) in laguerre(nodes).as_node_weight_pairs() {
        let u = y / a;
        let s = s0 * u.exp();
        if s.is_finite() && s < S_CAP {
            pts.push((s, w / a * (a * u).exp() * s));
        } else {
            dropped += w / a * TAU.powf(-t) * s0.powf(1.0 - t);
        }
    }
    (pts, dropped)
}

impl TailRule {
    fn new(t: f64, cfg: &TreeConfig) -> Result<Self> {
        let bound = tail_weight_bound(cfg.k, t, cfg.c_geo)?.bound;
        let mut rule = TailRule { t, bound, points: Vec::new(), dropped: 0.0, rel_err: 0.0, em_err: 0.0 };
        if let TailModel::Quadrature { nodes } = cfg.tail {
            let s0 = cfg.k as f64 + 0.5;
            let (points, dropped) = laguerre_points(t, s0, nodes);
            // model integrand |F'| ≈ 2πs times a slowly decaying subtree factor
            let model = |s: f64| (TAU * s).powf(-t) * (TAU * s).ln().powf(1.0 - t);
            let coarse: f64 = points.iter().map(|(s, f)| f * model(*s)).sum();
            let (fine_pts, _) = laguerre_points(t, s0, 2 * nodes);
            let fine: f64 = fine_pts.iter().map(|(s, f)| f * model(*s)).sum();
            rule.rel_err = ((coarse - fine) / fine).abs();
            rule.em_err = 2.0 * t * (TAU * s0).powf(-t) / (24.0 * s0);
            rule.points = points;
            rule.dropped = 2.0 * dropped;
        }
        Ok(rule)
    }
}

/// Children of one node with their one-step weights, and the mass whose
/// subtree is unknown.
struct Expansion {
    children: Vec<(CylinderPoint, f64)>,
    err_mass: f64,
}

impl Expansion {
    fn sum(&self) -> f64 {
        self.children.iter().map(|c| c.1).sum()
    }
}

fn expand(params: &MapParams, x: CylinderPoint, cfg: &TreeConfig, rule: &TailRule) -> Result<Expansion> {
    let t = rule.t;
    let set = preimages(params, x, cfg.k, cfg.tol)?;
    let mut children: Vec<(CylinderPoint, f64)> = set.branches.iter().map(|e| (e.x, e.deriv.norm().powf(-t))).collect();
    let mut err_mass: f64 =
        set.misses.iter().map(|k| if *k == 0 { 1.0 } else { (TAU * k.abs() as f64 / cfg.c_geo).powf(-t).min(1.0) }).sum();
    match cfg.tail {
        TailModel::Bound => err_mass += rule.bound,
        TailModel::Quadrature { .. } => {
            let base = x.lift() - params.offset();
            let mut tail = 0.0;
            for &(s, f) in &rule.points {
                for sign in [1.0, -1.0] {
                    let eq = LinExp { slope: params.ell_f64(), rhs: base + Complex64::new(0.0, sign * TAU * s) };
                    match eq.log_regime(None) {
                        Some(y) => {
                            let w = f * (params.ell_f64() - y.exp()).norm().powf(-t);
                            tail += w;
                            children.push((CylinderPoint::from_complex(y), w));
                        }
                        None => err_mass += f * (TAU * s).powf(-t),
                    }
                }
            }
            err_mass += rule.rel_err * tail + rule.em_err + rule.dropped;
        }
    }
    Ok(Expansion { children, err_mass })
}

/// `S_j = L_t^j 1(z)` for `j = 1..=n` from one tree expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSums {
    /// `levels[j-1]` is `S_j`.
    pub levels: Vec<WeightedValue>,
    pub expansions: usize,
    /// Largest one-step sum `L_t 1` seen at an expanded node, used in
    /// place of `sup L_t 1`.
    pub sup_estimate: f64,
    /// False if the budget stopped the expansion; unfinished levels then
    /// carry infinite error.
    pub complete: bool,
}

impl TreeSums {
    pub fn get(&self, j: usize) -> Option<WeightedValue> {
        j.checked_sub(1).and_then(|i| self.levels.get(i)).copied()
    }
}

/// Expands the depth-`n` preimage tree of `z` breadth first.
///
/// A child whose weight is below `prune·S_d` (`S_d` the total of its
/// parent's level) is counted at its own level but not expanded; its
/// deeper contribution goes into the error, as does the unknown subtree
/// of every omitted or estimated tail. Results do not depend on the
/// number of worker threads.
pub fn transfer_sums(params: &MapParams, t: f64, z: CylinderPoint, n: usize, cfg: &TreeConfig) -> Result<TreeSums> {
    if !(t > 1.0) {
        return Err(Error::TNotSummable(t));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("tree depth must be >= 1".into()));
    }
    cfg.validate(params)?;
    let rule = TailRule::new(t, cfg)?;
    let mut values = vec![0.0; n + 1];
    values[0] = 1.0;
    // err_mass[d]: mass entering level d+1 with unknown subtree
    let mut err_mass = vec![0.0; n];
    // pruned[m]: weight at level m that was not expanded
    let mut pruned = vec![0.0; n + 1];
    // expanded[d]: weight at level d whose children were computed
    let mut expanded = vec![0.0; n];
    let mut sup: f64 = 0.0;
    let mut expansions = 0usize;
    let mut reached = 0usize;
    let mut level: Vec<(CylinderPoint, f64)> = vec![(z, 1.0)];
    for d in 0..n {
        if expansions + level.len() > cfg.budget {
            break;
        }
        expansions += level.len();
        expanded[d] = level.iter().map(|a| a.1).sum();
        let last = d + 1 == n;
        let threshold = cfg.prune * values[d];
        if last {
            let parts: Vec<(f64, f64, f64)> = level
                .par_iter()
                .map(|(x, w)| expand(params, *x, cfg, &rule).map(|e| (w * e.sum(), w * e.err_mass, e.sum() + e.err_mass)))
                .collect::<Result<_>>()?;
            for (v, e, local) in parts {
                values[d + 1] += v;
                err_mass[d] += e;
                sup = sup.max(local);
            }
        } else {
            let parts: Vec<Expansion> = level.par_iter().map(|(x, _)| expand(params, *x, cfg, &rule)).collect::<Result<_>>()?;
            let mut next = Vec::with_capacity(parts.iter().map(|p| p.children.len()).sum());
            for ((_, w), e) in level.iter().zip(parts) {
                err_mass[d] += w * e.err_mass;
                sup = sup.max(e.sum() + e.err_mass);
                for (y, a) in e.children {
                    let cw = w * a;
                    values[d + 1] += cw;
                    if cw < threshold {
                        pruned[d + 1] += cw;
                    } else {
                        next.push((y, cw));
                    }
                }
            }
            level = next;
        }
        reached = d + 1;
    }
    let lam = sup.max(f64::MIN_POSITIVE);
    // mean one-step growth of the expanded nodes, used to continue pruned weight
    let growth: Vec<f64> = (0..reached).map(|d| values[d + 1] / expanded[d]).collect();
    let levels = (1..=n)
        .map(|j| {
            if j > reached {
                return WeightedValue { value: values[j], error: f64::INFINITY };
            }
            let mut value = values[j];
            let mut error = 0.0;
            for d in 0..j {
                error += err_mass[d] * lam.powi((j - d - 1) as i32);
            }
            for m in 1..j {
                let carried: f64 = growth[m..j].iter().product();
                let worst = lam.powi((j - m) as i32);
                value += pruned[m] * carried;
                error += pruned[m] * (worst - carried).max(carried);
            }
            WeightedValue { value, error }
        })
        .collect();
    Ok(TreeSums { levels, expansions, sup_estimate: sup, complete: reached == n })
}

/// One application of `L_t` to a bounded function `g` with `sup |g| ≤ g_sup`,
/// summing the branches `|k| ≤ K` and bounding the rest.
pub fn apply_transfer(
    params: &MapParams,
    t: f64,
    g: impl Fn(CylinderPoint) -> f64,
    g_sup: f64,
    z: CylinderPoint,
    k: i64,
) -> Result<WeightedValue> {
    let bound = tail_weight_bound(k, t, DEFAULT_C_GEO)?.bound;
    let set = preimages(params, z, k, DEFAULT_TOL)?;
    let value = set.branches.iter().map(|e| e.deriv.norm().powf(-t) * g(e.x)).sum();
    let missed: f64 = set
        .misses
        .iter()
        .map(|k| if *k == 0 { 1.0 } else { (TAU * k.abs() as f64 / DEFAULT_C_GEO).powf(-t).min(1.0) })
        .sum();
    Ok(WeightedValue { value, error: (bound + missed) * g_sup })
}

/// `L_t^n 1(z)` with the closed-form tail bound at every node.
pub fn iterate_transfer_one(params: &MapParams, t: f64, z: CylinderPoint, n: usize, k: i64, prune: f64) -> Result<WeightedValue> {
    let cfg = TreeConfig::bound(k, prune);
    let sums = transfer_sums(params, t, z, n, &cfg)?;
    let s = sums.levels[n - 1];
    if !sums.complete {
        return Err(Error::BudgetExceeded { budget: cfg.budget, partial: s.value });
    }
    Ok(s)
}

/// The repelling fixed point with lift index 1, else −1.
pub fn default_base_point(params: &MapParams) -> Result<CylinderPoint> {
    repelling_fixed_point(params, 1)
        .or_else(|| repelling_fixed_point(params, -1))
        .map(|p| p.point)
        .ok_or_else(|| Error::InvalidArgument(format!("no repelling fixed point with lift index ±1 at {params}")))
}

/// `log(b/a)` with its interval half-width for `a, b` known up to their errors.
fn log_ratio(a: WeightedValue, b: WeightedValue) -> (f64, f64) {
    let r = (b.value / a.value).ln();
    if a.lo() <= 0.0 || b.lo() <= 0.0 {
        return (r, f64::INFINITY);
    }
    let hi = (b.hi() / a.lo()).ln();
    let lo = (b.lo() / a.hi()).ln();
    (r, (hi - r).max(r - lo))
}

/// Ratio estimate `log(S_n / S_{n−1})` of the pressure from tree sums.
///
/// The uncertainty adds the interval propagation of both sums to the drift
/// `|log(S_n/S_{n−1}) − log(S_{n−1}/S_{n−2})|`.
pub fn ratio_from_sums(sums: &TreeSums, t: f64, n: usize, cfg: &TreeConfig) -> Result<PressureEstimate> {
    if n < 2 || n > sums.levels.len() {
        return Err(Error::InvalidArgument(format!("ratio needs 2 <= n <= {}, got {n}", sums.levels.len())));
    }
    let one = WeightedValue { value: 1.0, error: 0.0 };
    let at = |j: usize| if j == 0 { one } else { sums.levels[j - 1] };
    let (r, spread) = log_ratio(at(n - 1), at(n));
    let (r_prev, _) = log_ratio(at(n - 2), at(n - 1));
    let drift = (r - r_prev).abs();
    Ok(PressureEstimate {
        t,
        value: r,
        uncertainty: spread + drift,
        method: PressureMethod::Ratio,
        n,
        k: cfg.k,
        prune: cfg.prune,
        drift,
    })
}

/// `P(t) ≈ log(S_n / S_{n−1})` at base point `z`, with the default tail
/// model.
pub fn pressure_ratio(params: &MapParams, t: f64, z: CylinderPoint, n: usize, k: i64, prune: f64) -> Result<PressureEstimate> {
    let cfg = TreeConfig { k, prune, ..TreeConfig::default() };
    pressure_ratio_with(params, t, z, n, &cfg)
}

pub fn pressure_ratio_with(params: &MapParams, t: f64, z: CylinderPoint, n: usize, cfg: &TreeConfig) -> Result<PressureEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ratio estimator needs n >= 2, got {n}")));
    }
    let sums = transfer_sums(params, t, z, n, cfg)?;
    if !sums.complete {
        return Err(Error::BudgetExceeded { budget: cfg.budget, partial: sums.levels[n - 1].value });
    }
    ratio_from_sums(&sums, t, n, cfg)
}

/// Periodic orbits found for [`zeta_pressure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaReport {
    pub estimate: PressureEstimate,
    /// Repelling points with `F^n(x) = x`.
    pub points: Vec<PeriodicPoint>,
    /// Words whose contraction iteration did not settle.
    pub failures: Vec<Vec<Branch>>,
    /// `Σ |(F^n)'(x)|^{-t}` over `points`.
    pub sum: f64,
    /// Bound used for the words with a letter beyond `K`.
    pub tail: f64,
}

/// Letters used for periodic words: the main branch for every `|k| ≤ K`
/// and the second sheet where one can exist.
fn letters(params: &MapParams, k: i64) -> Vec<Branch> {
    let thr = simple_branch_threshold(params);
    let mut out: Vec<Branch> = (-k..=k).map(Branch::main).collect();
    out.extend((-k.min(thr)..=k.min(thr)).map(|k| Branch { k, sheet: 1 }));
    out
}

fn word_fixed_point(params: &MapParams, word: &[Branch], start: CylinderPoint, tol: f64) -> Option<CylinderPoint> {
    let mut x = start;
    for _ in 0..200 {
        let next = inverse_branch(params, x, word, DEFAULT_TOL).ok()?;
        let step = next.distance(&x);
        x = next;
        if step < tol {
            return Some(x);
        }
    }
    None
}

/// Pressure from repelling periodic points of period `n`:
/// `(1/n)·log Σ_{F^n(x)=x} |(F^n)'(x)|^{-t}` over words with letters `|k| ≤ K`.
///
/// Words with a letter beyond `K` are bounded by `n·T(K,t)·S^{n−1}`, `S`
/// the truncated period-one sum plus `T(K, t)`.
pub fn zeta_pressure(params: &MapParams, t: f64, n: usize, k: i64) -> Result<ZetaReport> {
    if !(t > 1.0) {
        return Err(Error::TNotSummable(t));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("period must be >= 1".into()));
    }
    let tail_one = tail_weight_bound(k, t, DEFAULT_C_GEO)?.bound;
    let mut points: Vec<PeriodicPoint> = Vec::new();
    let mut failures = Vec::new();
    if n == 1 {
        let report = fixed_points(params, -k..=k, DEFAULT_TOL)?;
        points.extend(report.points.into_iter().filter(|p| p.is_repelling()));
    } else {
        let alphabet = letters(params, k);
        let start = default_base_point(params)?;
        let mut words: Vec<Vec<Branch>> = vec![Vec::new()];
        for _ in 0..n {
            words = words.into_iter().flat_map(|w| alphabet.iter().map(move |b| [w.clone(), vec![*b]].concat())).collect();
        }
        let found: Vec<(Vec<Branch>, Option<CylinderPoint>)> =
            words.into_par_iter().map(|w| (w.clone(), word_fixed_point(params, &w, start, 1e-13))).collect();
        for (word, x) in found {
            let Some(x) = x else {
                failures.push(word);
                continue;
            };
            let multiplier = orbit_derivative(params, x, n).to_complex();
            let p = PeriodicPoint { point: x, period: n, multiplier, branch_word: word };
            if p.residual(params) < 1e-9 && p.is_repelling() {
                points.push(p);
            }
        }
        points.sort_by(|a, b| a.point.re().total_cmp(&b.point.re()).then(a.point.im().total_cmp(&b.point.im())));
        points.dedup_by(|a, b| a.point.distance(&b.point) < 1e-8);
    }
    let weight = |p: &PeriodicPoint| p.multiplier.norm().powf(-t);
    let sum: f64 = points.iter().map(weight).sum();
    let s1: f64 = if n == 1 {
        sum
    } else {
        fixed_points(params, -k..=k, DEFAULT_TOL)?.points.iter().filter(|p| p.is_repelling()).map(weight).sum()
    };
    let tail = n as f64 * tail_one * (s1 + tail_one).powi(n as i32 - 1);
    let value = sum.ln() / n as f64;
    let uncertainty = (1.0 + tail / sum).ln() / n as f64;
    let estimate = PressureEstimate {
        t,
        value,
        uncertainty,
        method: PressureMethod::Zeta,
        n,
        k,
        prune: 0.0,
        drift: 0.0,
    };
    Ok(ZetaReport { estimate, points, failures, sum, tail })
}

/// Values of a function at sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSamples {
    pub points: Vec<CylinderPoint>,
    pub values: Vec<f64>,
    pub t: f64,
}

/// Iterates `ψ_m = L̂_t^m 1` at the samples, for `m = 1..=iterations`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    /// `ψ_m` for the last `m`, normalized to 1 at the first sample.
    pub samples: FunctionSamples,
    /// `history[m-1]` is `ψ_m` at every sample, same normalization.
    pub history: Vec<Vec<f64>>,
    /// `changes[m-2]`: largest relative change from `ψ_{m−1}` to `ψ_m`.
    pub changes: Vec<f64>,
    /// `residuals[m-2] = sup |L̂_t ψ_{m−1} − ψ_{m−1}|` over the samples.
    pub residuals: Vec<f64>,
    /// `log(S_m/S_{m−1})` at the first sample, used for `L̂_t = e^{−P} L_t`.
    pub pressures: Vec<f64>,
}

/// Power iteration of the normalized operator `L̂_t = e^{−P} L_t` on the
/// constant function. The first sample is the normalization point; with
/// `P` taken as the ratio estimate there, `L̂_t ψ_{m−1} = ψ_m`.
pub fn eigenfunction_iterate(
    params: &MapParams,
    t: f64,
    samples: &[CylinderPoint],
    iterations: usize,
    k: i64,
    prune: f64,
) -> Result<EigenReport> {
    let cfg = TreeConfig { k, prune, ..TreeConfig::default() };
    eigenfunction_iterate_with(params, t, samples, iterations, &cfg)
}

pub fn eigenfunction_iterate_with(
    params: &MapParams,
    t: f64,
    samples: &[CylinderPoint],
    iterations: usize,
    cfg: &TreeConfig,
) -> Result<EigenReport> {
    if samples.is_empty() || iterations == 0 {
        return Err(Error::InvalidArgument("need at least one sample and one iteration".into()));
    }
    let sums: Vec<TreeSums> = samples.iter().map(|z| transfer_sums(params, t, *z, iterations, cfg)).collect::<Result<_>>()?;
    if let Some(s) = sums.iter().find(|s| !s.complete) {
        return Err(Error::BudgetExceeded { budget: cfg.budget, partial: s.levels[iterations - 1].value });
    }
    let history: Vec<Vec<f64>> =
        (0..iterations).map(|m| sums.iter().map(|s| s.levels[m].value / sums[0].levels[m].value).collect()).collect();
    let mut changes = Vec::new();
    let mut residuals = Vec::new();
    for m in 1..iterations {
        let (prev, cur) = (&history[m - 1], &history[m]);
        changes.push(prev.iter().zip(cur).map(|(a, b)| ((b - a) / a).abs()).fold(0.0, f64::max));
        residuals.push(prev.iter().zip(cur).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max));
    }
    let mut pressures = vec![sums[0].levels[0].value.ln()];
    pressures.extend((1..iterations).map(|m| (sums[0].levels[m].value / sums[0].levels[m - 1].value).ln()));
    let samples = FunctionSamples { points: samples.to_vec(), values: history[iterations - 1].clone(), t };
    Ok(EigenReport { samples, history, changes, residuals, pressures })
}

/// Point masses approximating the conformal measure `m_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<(CylinderPoint, f64)>,
    pub t: f64,
    pub depth: usize,
    pub base: CylinderPoint,
    /// `Σ |(F^depth)'(x)|^{-t}` over the atoms before normalization.
    pub raw_total: f64,
    /// Pressure used for the `e^{depth·P}` factor.
    pub pressure: f64,
}

impl AtomicMeasure {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Mass of the atoms satisfying `inside`.
    pub fn mass_of(&self, inside: impl Fn(CylinderPoint) -> bool) -> f64 {
        self.atoms.iter().filter(|a| inside(a.0)).map(|a| a.1).sum()
    }
}

/// Atoms at the depth-`depth` preimages of `base` with mass proportional
/// to `|(F^depth)'(x)|^{-t}·e^{depth·P}`, normalized to total 1. Only
/// validated preimages with `|k| ≤ K` are used; nodes lighter than
/// `prune` times their level total are dropped.
pub fn conformal_atoms(
    params: &MapParams,
    t: f64,
    p: f64,
    base: CylinderPoint,
    depth: usize,
    k: i64,
    prune: f64,
) -> Result<AtomicMeasure> {
    if !(t > 1.0) {
        return Err(Error::TNotSummable(t));
    }
    let cfg = TreeConfig::bound(k, prune);
    cfg.validate(params)?;
    let scale = p.exp();
    let mut level: Vec<(CylinderPoint, f64)> = vec![(base, 1.0)];
    let mut expansions = 0usize;
    for _ in 0..depth {
        expansions += level.len();
        if expansions > cfg.budget {
            return Err(Error::BudgetExceeded { budget: cfg.budget, partial: level.iter().map(|a| a.1).sum() });
        }
        let sets: Vec<_> = level.par_iter().map(|(x, _)| preimages(params, *x, k, DEFAULT_TOL)).collect::<Result<_>>()?;
        let mut next = Vec::new();
        for ((_, w), set) in level.iter().zip(sets) {
            next.extend(set.branches.iter().map(|e| (e.x, w * e.deriv.norm().powf(-t) * scale)));
        }
        let total: f64 = next.iter().map(|a| a.1).sum();
        next.retain(|a| a.1 >= prune * total);
        level = next;
    }
    let raw_total: f64 = level.iter().map(|a| a.1).sum::<f64>() / scale.powi(depth as i32);
    let total: f64 = level.iter().map(|a| a.1).sum();
    for a in &mut level {
        a.1 /= total;
    }
    Ok(AtomicMeasure { atoms: level, t, depth, base, raw_total, pressure: p })
}

/// A small box on which `F` is injective, with membership in `F(box)`
/// decided through the local inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBox {
    pub center: CylinderPoint,
    pub half_width: f64,
}

impl TestBox {
    pub fn contains(&self, x: CylinderPoint) -> bool {
        let d = x.lift() - self.center.lift();
        let dy = canonical_im(d.im);
        d.re.abs() <= self.half_width && dy.abs() <= self.half_width
    }

    /// Whether `y` lies in `F(box)`: the solution of `F(x) = y` reached by
    /// Newton from the box center must lie in the box.
    pub fn image_contains(&self, params: &MapParams, y: CylinderPoint) -> bool {
        let residual = |x: Complex64| {
            let g = params.lift(x) - y.lift();
            Complex64::new(g.re, canonical_im(g.im))
        };
        let mut x = self.center.lift();
        for _ in 0..50 {
            let step = residual(x) / (params.ell_f64() - x.exp());
            if !step.is_finite() {
                return false;
            }
            x -= step;
            if step.norm() < 1e-14 {
                break;
            }
        }
        residual(x).norm() < 1e-10 && self.contains(CylinderPoint::from_complex(x))
    }
}

/// `|ν(F(A)) − Σ_{x∈A} e^P |F'(x)|^t ν({x})|` for the atomic measure `ν`.
pub fn conformal_defect(params: &MapParams, nu: &AtomicMeasure, a: &TestBox) -> f64 {
    let lhs = nu.mass_of(|y| a.image_contains(params, y));
    let scale = nu.pressure.exp();
    let rhs: f64 = nu
        .atoms
        .iter()
        .filter(|x| a.contains(x.0))
        .map(|x| scale * derivative(params, x.0).norm().powf(nu.t) * x.1)
        .sum();
    (lhs - rhs).abs()
}

/// Returns whether `F` is injective on the box, by checking that the
/// derivative does not vary by more than half its size across it.
pub fn box_is_injective(params: &MapParams, a: &TestBox) -> bool {
    let d0 = derivative(params, a.center);
    let h = a.half_width;
    let corners = [(h, h), (h, -h), (-h, h), (-h, -h)];
    corners.iter().all(|(dx, dy)| {
        let x = CylinderPoint::new(a.center.re() + dx, a.center.im() + dy);
        (derivative(params, x) - d0).norm() < 0.5 * d0.norm()
    }) && 2.0 * h < std::f64::consts::PI
}
