//! Topological pressure and the zero of `t ↦ P(t)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CylinderPoint, MapParams};
use crate::error::{Error, Result};
use crate::transfer::{default_base_point, pressure_ratio_with, TreeConfig};

/// Default target width of the Bowen bracket.
pub const DEFAULT_ACCURACY: f64 = 5e-3;
/// Bracket scan points.
pub const SCAN: [f64; 6] = [1.05, 1.2, 1.4, 1.7, 2.0, 2.5];

/// How a pressure value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureMethod {
    Ratio,
    Zeta,
}

/// `P(t)` with its reported uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub t: f64,
    pub value: f64,
    pub uncertainty: f64,
    pub method: PressureMethod,
    pub n: usize,
    pub k: i64,
    pub prune: f64,
    /// Change of the ratio estimate over the last level, part of `uncertainty`.
    pub drift: f64,
}

impl PressureEstimate {
    /// `+1` or `−1` if the sign is certain within the uncertainty.
    pub fn certified_sign(&self) -> Option<i8> {
        if self.value - self.uncertainty > 0.0 {
            Some(1)
        } else if self.value + self.uncertainty < 0.0 {
            Some(-1)
        } else {
            None
        }
    }
}

/// One rung of the refinement ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub n: usize,
    pub tree: TreeConfig,
}

/// Increasingly expensive settings tried by [`pressure`]; the last rung is
/// the escalation used when a sign stays ambiguous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureLadder {
    pub rungs: Vec<Rung>,
}

impl Default for PressureLadder {
    fn default() -> Self {
        let rung = |n, k, prune, nodes| Rung { n, tree: TreeConfig::quadrature(k, prune, nodes) };
        Self { rungs: vec![rung(3, 7, 1e-6, 4), rung(4, 7, 1e-7, 4), rung(5, 7, 1e-8, 4), rung(5, 10, 1e-9, 6)] }
    }
}

impl PressureLadder {
    /// Settings sized for the parameter: `K` must reach the simple-branch
    /// threshold `2ℓ+3`.
    pub fn for_params(params: &MapParams) -> Self {
        let thr = crate::preimage::simple_branch_threshold(params);
        let mut ladder = Self::default();
        for r in &mut ladder.rungs {
            r.tree.k = r.tree.k.max(thr);
        }
        ladder
    }
}

/// Walks the ladder until `stop` accepts an estimate; returns the last
/// estimate and whether it was accepted.
fn climb(
    params: &MapParams,
    t: f64,
    base: CylinderPoint,
    ladder: &PressureLadder,
    stop: impl Fn(&PressureEstimate) -> bool,
) -> Result<(PressureEstimate, bool, usize)> {
    let mut last = None;
    let mut evaluations = 0;
    for rung in &ladder.rungs {
        let est = match pressure_ratio_with(params, t, base, rung.n, &rung.tree) {
            Ok(e) => e,
            Err(Error::BudgetExceeded { .. }) if last.is_some() => break,
            Err(e) => return Err(e),
        };
        evaluations += 1;
        if stop(&est) {
            return Ok((est, true, evaluations));
        }
        last = Some(est);
    }
    let est = last.ok_or_else(|| Error::InvalidArgument("empty pressure ladder".into()))?;
    Ok((est, false, evaluations))
}

/// `P(t)` at the default base point, refined until the uncertainty is
/// below `accuracy`.
pub fn pressure(params: &MapParams, t: f64, accuracy: f64) -> Result<PressureEstimate> {
    pressure_with(params, t, accuracy, &PressureLadder::for_params(params))
}

pub fn pressure_with(params: &MapParams, t: f64, accuracy: f64, ladder: &PressureLadder) -> Result<PressureEstimate> {
    if !(accuracy > 0.0) {
        return Err(Error::InvalidArgument(format!("accuracy must be positive, got {accuracy}")));
    }
    pressure_at(params, t, default_base_point(params)?, accuracy, ladder)
}

/// [`pressure_with`] at an explicit base point.
pub fn pressure_at(params: &MapParams, t: f64, base: CylinderPoint, accuracy: f64, ladder: &PressureLadder) -> Result<PressureEstimate> {
    if !(accuracy > 0.0) {
        return Err(Error::InvalidArgument(format!("accuracy must be positive, got {accuracy}")));
    }
    let (est, ok, _) = climb(params, t, base, ladder, |e| e.uncertainty < accuracy)?;
    if ok {
        Ok(est)
    } else {
        Err(Error::AccuracyNotReached { requested: accuracy, reached: est.uncertainty, value: est.value })
    }
}

/// Refines until the sign of `P(t)` is certified or the ladder is exhausted.
pub fn pressure_sign(params: &MapParams, t: f64, base: CylinderPoint, ladder: &PressureLadder) -> Result<(PressureEstimate, usize)> {
    let (est, _, evals) = climb(params, t, base, ladder, |e| e.certified_sign().is_some())?;
    Ok((est, evals))
}

/// The result of [`bowen_dimension`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionRecord {
    pub ell: u32,
    pub c: Complex64,
    pub t_star: f64,
    pub uncertainty: f64,
    pub bracket: (f64, f64),
    /// Pressure evaluations, counting every ladder rung.
    pub evaluations: usize,
    pub diagnostics: BTreeMap<String, f64>,
    /// Every estimate used, in order.
    pub trace: Vec<PressureEstimate>,
}

impl DimensionRecord {
    pub fn width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }

    /// Whether the bracket is certified and narrower than `accuracy`.
    pub fn converged(&self, accuracy: f64) -> bool {
        self.diagnostics.get("limited_by_truncation").copied() == Some(0.0) && self.width() < accuracy
    }
}

/// Locates `t*` with `P(t*) = 0`, using the default ladder.
pub fn bowen_dimension(params: &MapParams, accuracy: f64) -> Result<DimensionRecord> {
    bowen_dimension_with(params, accuracy, &PressureLadder::for_params(params))
}

/// Scans [`SCAN`] for a certified sign change, then bisects. A midpoint
/// whose sign stays ambiguous after the whole ladder is retried at the two
/// quarter points of the bracket; the search stops with
/// `limited_by_truncation = 1` when neither quarter point moves an
/// endpoint while the bracket is still wider than `accuracy`.
pub fn bowen_dimension_with(params: &MapParams, accuracy: f64, ladder: &PressureLadder) -> Result<DimensionRecord> {
    if !(accuracy > 0.0) {
        return Err(Error::InvalidArgument(format!("accuracy must be positive, got {accuracy}")));
    }
    let base = default_base_point(params)?;
    let mut trace: Vec<PressureEstimate> = Vec::new();
    let mut evaluations = 0;
    let mut bracket: Option<(PressureEstimate, PressureEstimate)> = None;
    let mut prev: Option<PressureEstimate> = None;
    for &t in &SCAN {
        let (est, evals) = pressure_sign(params, t, base, ladder)?;
        evaluations += evals;
        trace.push(est);
        match est.certified_sign() {
            Some(-1) => {
                if let Some(p) = prev {
                    bracket = Some((p, est));
                }
                break;
            }
            Some(_) => prev = Some(est),
            None => {}
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        let trace = serde_json::to_string(&trace).unwrap_or_default();
        return Err(Error::NoBracket { trace });
    };
    let mut sign_at = |t: f64, trace: &mut Vec<PressureEstimate>| -> Result<PressureEstimate> {
        let (est, evals) = pressure_sign(params, t, base, ladder)?;
        evaluations += evals;
        trace.push(est);
        Ok(est)
    };
    let mut ambiguous: Vec<f64> = Vec::new();
    while hi.t - lo.t >= accuracy {
        let mid = 0.5 * (lo.t + hi.t);
        if !ambiguous.contains(&mid) {
            let est = sign_at(mid, &mut trace)?;
            match est.certified_sign() {
                Some(1) => lo = est,
                Some(_) => hi = est,
                None => ambiguous.push(mid),
            }
            continue;
        }
        let quarter = 0.25 * (hi.t - lo.t);
        let (q1, q3) = (sign_at(lo.t + quarter, &mut trace)?, sign_at(hi.t - quarter, &mut trace)?);
        let mut moved = false;
        if q1.certified_sign() == Some(1) {
            lo = q1;
            moved = true;
        }
        if q3.certified_sign() == Some(-1) {
            hi = q3;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    let limited = hi.t - lo.t >= accuracy;
    let t_star = 0.5 * (lo.t + hi.t);
    let uncertainty = 0.5 * (hi.t - lo.t);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("limited_by_truncation".to_string(), if limited { 1.0 } else { 0.0 });
    diagnostics.insert("p_lo".to_string(), lo.value);
    diagnostics.insert("p_lo_uncertainty".to_string(), lo.uncertainty);
    diagnostics.insert("p_hi".to_string(), hi.value);
    diagnostics.insert("p_hi_uncertainty".to_string(), hi.uncertainty);
    diagnostics.insert("slope".to_string(), (hi.value - lo.value) / (hi.t - lo.t));
    diagnostics.insert("t_star_outside_1_2".to_string(), if t_star > 1.0 && t_star < 2.0 { 0.0 } else { 1.0 });
    Ok(DimensionRecord {
        ell: params.ell(),
        c: params.c(),
        t_star,
        uncertainty,
        bracket: (lo.t, hi.t),
        evaluations,
        diagnostics,
        trace,
    })
}
