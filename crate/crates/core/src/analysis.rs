//! Dependence on the parameter `c`: continuation of periodic points,
//! expansion constants, dimension sweeps and their smoothness diagnostics.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{bowen_dimension, DimensionRecord};
use crate::dynamics::{
    canonical_im, derivative, fixed_points, param_derivative_at, CylinderPoint, MapParams, PeriodicPoint,
};
use crate::error::{Error, Result};
use crate::preimage::{branch_preimage, Branch, DEFAULT_TOL};

/// Largest accepted continuation step `|Δc|`.
pub const MAX_STEP: f64 = 0.02;
/// Halvings of a rejected step before giving up.
pub const MAX_HALVINGS: usize = 6;
/// Distance kept from the boundary of `D(ℓ, 1)` by sweep grids.
pub const DEFAULT_MARGIN: f64 = 0.05;

/// Which `∂F/∂c` the continuation uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamDerivative {
    /// `1 − (ℓ−1)/c`, the derivative of `c − (ℓ−1)·log c`.
    #[default]
    Exact,
    /// The constant 1.
    Unit,
}

impl ParamDerivative {
    fn value(self, params: &MapParams) -> Complex64 {
        match self {
            ParamDerivative::Exact => param_derivative_at(params.ell(), params.c()),
            ParamDerivative::Unit => Complex64::new(1.0, 0.0),
        }
    }
}

/// One point of a continuation track.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub c: Complex64,
    pub z: CylinderPoint,
    pub multiplier: Complex64,
    pub residual: f64,
    /// `dz/dc = D₁Fⁿ / (1 − D₂Fⁿ)` at this point.
    pub h_prime: Complex64,
}

/// A periodic point followed along a path of parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrack {
    pub period: usize,
    pub path: Vec<TrackPoint>,
    pub start: PeriodicPoint,
}

/// `Fⁿ(z) − z` reduced to the strip, `(Fⁿ)'(z)` and `∂_c Fⁿ(z)`.
fn orbit_jets(params: &MapParams, z: Complex64, n: usize, d1: Complex64) -> (Complex64, Complex64, Complex64) {
    let mut x = z;
    let mut dz = Complex64::new(1.0, 0.0);
    let mut dc = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        let fp = params.ell_f64() - x.exp();
        // ∂_c F^j = D₁F(F^{j−1}) + D₂F(F^{j−1})·∂_c F^{j−1}
        dc = d1 + fp * dc;
        dz *= fp;
        x = params.lift(x);
    }
    let g = x - z;
    (Complex64::new(g.re, canonical_im(g.im)), dz, dc)
}

fn newton_periodic(params: &MapParams, mut z: Complex64, n: usize, tol: f64) -> Option<Complex64> {
    for _ in 0..50 {
        let (g, dz, _) = orbit_jets(params, z, n, Complex64::new(0.0, 0.0));
        let step = g / (dz - 1.0);
        if !step.is_finite() {
            return None;
        }
        z -= step;
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let (g, _, _) = orbit_jets(params, z, n, Complex64::new(0.0, 0.0));
    (g.norm() < tol).then_some(z)
}

/// `dz/dc` at a period-`n` point from the implicit relation
/// `D₁Fⁿ + D₂Fⁿ·h' = h'`.
pub fn periodic_point_velocity(params: &MapParams, z: CylinderPoint, n: usize, convention: ParamDerivative) -> Result<Complex64> {
    let (_, dz, dc) = orbit_jets(params, z.lift(), n, convention.value(params));
    let denom = 1.0 - dz;
    if denom.norm() < 1e-6 {
        return Err(Error::DenominatorNearOne(denom.norm()));
    }
    Ok(dc / denom)
}

fn track_point(params: &MapParams, z: Complex64, n: usize, convention: ParamDerivative) -> Result<TrackPoint> {
    let (g, dz, _) = orbit_jets(params, z, n, Complex64::new(0.0, 0.0));
    let p = CylinderPoint::from_complex(z);
    Ok(TrackPoint {
        c: params.c(),
        z: p,
        multiplier: dz,
        residual: g.norm(),
        h_prime: periodic_point_velocity(params, p, n, convention)?,
    })
}

/// Follows `p` from `params₀` through the parameters in `path` by
/// predictor (`z + h'·Δc`) and corrector (Newton on `Fⁿ(z) = z`) steps.
///
/// Legs longer than [`MAX_STEP`] are split. A rejected step is halved up to
/// [`MAX_HALVINGS`] times. The track stops with an error when the point
/// stops being repelling.
pub fn continue_periodic(
    params0: &MapParams,
    p: &PeriodicPoint,
    path: &[Complex64],
    tol: f64,
    convention: ParamDerivative,
) -> Result<ContinuationTrack> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTol(tol));
    }
    let n = p.period;
    let mut params = *params0;
    let mut z = p.point.lift();
    let mut out = Vec::with_capacity(path.len());
    for &target in path {
        let target_params = params.with_c(target)?;
        while params.c() != target {
            let remaining = target - params.c();
            let legs = (remaining.norm() / MAX_STEP).ceil().max(1.0);
            let mut dc = remaining / legs;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let c_new = if dc == remaining { target } else { params.c() + dc };
                let next = params.with_c(c_new)?;
                let h = periodic_point_velocity(&params, CylinderPoint::from_complex(z), n, convention)?;
                let guess = z + h * dc;
                if let Some(z_new) = newton_periodic(&next, guess, n, tol) {
                    let (_, dz, _) = orbit_jets(&next, z_new, n, Complex64::new(0.0, 0.0));
                    // the corrector must stay close to the prediction
                    if (z_new - guess).norm() < 0.5 * (h * dc).norm().max(1e-3) && dz.norm() > 1.0 {
                        params = next;
                        z = z_new;
                        accepted = true;
                        break;
                    }
                }
                dc *= 0.5;
            }
            if !accepted {
                return Err(Error::StepRejected { c: crate::dynamics::format_complex(params.c()) });
            }
        }
        params = target_params;
        let point = track_point(&params, z, n, convention)?;
        if point.multiplier.norm() <= 1.0 {
            return Err(Error::StepRejected { c: crate::dynamics::format_complex(target) });
        }
        out.push(point);
    }
    Ok(ContinuationTrack { period: n, path: out, start: p.clone() })
}

/// One measured derivative `log|(Fⁿ)'(x)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionObservation {
    pub c: Complex64,
    pub n: usize,
    pub log_modulus: f64,
    /// `log` of the measured contraction `|x − x'|/|w − w'|` of the inverse
    /// branch, when it was measured.
    pub log_contraction: Option<f64>,
}

/// Fitted constants of `|(Fⁿ)'| ≥ L κⁿ` and `|(F_vⁿ)'| ≤ L_inv βⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionEstimate {
    pub l: f64,
    pub kappa: f64,
    pub l_inv: f64,
    pub beta: f64,
    pub samples: usize,
    pub n_max: usize,
    pub c_window: (Complex64, f64),
    /// Smallest `log|(Fⁿ)'| − log(Lκⁿ)` per `n`, nonnegative by construction.
    pub residuals: Vec<f64>,
    pub observations: Vec<ExpansionObservation>,
}

impl ExpansionEstimate {
    /// Whether every observation satisfies `|(Fⁿ)'| ≥ L κⁿ` (up to rounding).
    pub fn certifies(&self, obs: &[ExpansionObservation]) -> bool {
        obs.iter().all(|o| o.log_modulus >= self.l.ln() + o.n as f64 * self.kappa.ln() - 1e-9)
    }

    pub fn certifies_expansion(&self) -> bool {
        self.kappa > 1.0 && self.l > 0.0
    }
}

/// Parameters used by [`expansion_constants`]: the center and `count − 1`
/// points on the circle of radius `radius / 2`.
pub fn window_parameters(params: &MapParams, radius: f64, count: usize) -> Result<Vec<MapParams>> {
    let mut out = vec![*params];
    for j in 1..count {
        let angle = TAU * (j - 1) as f64 / (count - 1) as f64;
        out.push(params.with_c(params.c() + Complex64::from_polar(0.5 * radius, angle))?);
    }
    Ok(out)
}

/// Derivative observations at one parameter: every repelling fixed point
/// under its own inverse branch repeated `n = 1..=n_max` times, and
/// `samples` random inverse-branch words per depth started at the
/// lift-index-1 repelling fixed point. The inverse-branch contraction is
/// measured on the same words by a finite difference.
pub fn expansion_observations(params: &MapParams, samples: usize, n_max: usize, seed: u64) -> Result<Vec<ExpansionObservation>> {
    let k = 12;
    let mut runs: Vec<(CylinderPoint, Vec<Branch>)> = Vec::new();
    let fps = fixed_points(params, -k..=k, DEFAULT_TOL)?;
    for p in fps.points.iter().filter(|p| p.is_repelling()) {
        let set = crate::preimage::preimages(params, p.point, k, DEFAULT_TOL)?;
        let Some(own) = set.branches.iter().min_by(|a, b| a.x.distance(&p.point).total_cmp(&b.x.distance(&p.point))) else {
            continue;
        };
        if own.x.distance(&p.point) < 1e-8 {
            runs.extend((1..=n_max).map(|n| (p.point, vec![own.branch; n])));
        }
    }
    let base = crate::transfer::default_base_point(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 1..=n_max {
        for _ in 0..samples {
            runs.push((base, (0..n).map(|_| Branch::main(rng.gen_range(-k..=k))).collect()));
        }
    }
    let eps = 1e-6;
    let mut obs = Vec::with_capacity(runs.len());
    for (w, word) in runs {
        let shifted = CylinderPoint::new(w.re() + eps, w.im());
        let (Some((x, lm)), Some((x2, _))) = (follow(params, w, &word), follow(params, shifted, &word)) else {
            continue;
        };
        let contraction = (x.distance(&x2) / eps).ln();
        obs.push(ExpansionObservation { c: params.c(), n: word.len(), log_modulus: lm, log_contraction: Some(contraction) });
    }
    Ok(obs)
}

/// Applies the inverse branches of `word`, accumulating `log|(Fⁿ)'|` at the
/// visited points.
fn follow(params: &MapParams, w: CylinderPoint, word: &[Branch]) -> Option<(CylinderPoint, f64)> {
    let mut x = w;
    let mut lm = 0.0;
    for b in word {
        x = branch_preimage(params, x, *b)?;
        lm += derivative(params, x).norm().ln();
    }
    Some((x, lm))
}

/// Fits `(L, κ)` as the steepest line `log L + n·log κ` through the smallest
/// `n = 1` value that stays below every observation, and `(L_inv, β)`
/// likewise from above on the measured contractions.
pub fn fit_expansion(obs: &[ExpansionObservation], n_max: usize) -> Result<(f64, f64, f64, f64, Vec<f64>)> {
    if let Some(o) = obs.iter().find(|o| o.log_modulus <= 0.0) {
        return Err(Error::NoExpansion { n: o.n, modulus: o.log_modulus.exp() });
    }
    let min_at = |n: usize| obs.iter().filter(|o| o.n == n).map(|o| o.log_modulus).fold(f64::INFINITY, f64::min);
    let max_contr = |n: usize| {
        obs.iter().filter(|o| o.n == n).filter_map(|o| o.log_contraction).fold(f64::NEG_INFINITY, f64::max)
    };
    let m1 = min_at(1);
    let log_kappa = (2..=n_max).map(|n| (min_at(n) - m1) / (n as f64 - 1.0)).fold(f64::INFINITY, f64::min);
    let log_kappa = if log_kappa.is_finite() { log_kappa } else { m1 };
    let log_l = (1..=n_max).map(|n| min_at(n) - n as f64 * log_kappa).fold(f64::INFINITY, f64::min);
    let c1 = max_contr(1);
    let log_beta = (2..=n_max).map(|n| (max_contr(n) - c1) / (n as f64 - 1.0)).fold(f64::NEG_INFINITY, f64::max);
    let log_beta = if log_beta.is_finite() { log_beta } else { c1 };
    let log_l_inv = (1..=n_max).map(|n| max_contr(n) - n as f64 * log_beta).fold(f64::NEG_INFINITY, f64::max);
    let residuals = (1..=n_max).map(|n| min_at(n) - log_l - n as f64 * log_kappa).collect();
    Ok((log_l.exp(), log_kappa.exp(), log_l_inv.exp(), log_beta.exp(), residuals))
}

/// Expansion constants from observations at `params` and four parameters
/// on the circle of radius `c_radius/2` around it.
pub fn expansion_constants(params: &MapParams, c_radius: f64, samples: usize, n_max: usize) -> Result<ExpansionEstimate> {
    if samples < 10 {
        return Err(Error::InvalidArgument(format!("samples must be >= 10, got {samples}")));
    }
    if n_max < 5 {
        return Err(Error::InvalidArgument(format!("n_max must be >= 5, got {n_max}")));
    }
    let mut observations = Vec::new();
    for (i, p) in window_parameters(params, c_radius, 5)?.iter().enumerate() {
        observations.extend(expansion_observations(p, samples, n_max, i as u64)?);
    }
    let (l, kappa, l_inv, beta, residuals) = fit_expansion(&observations, n_max)?;
    Ok(ExpansionEstimate {
        l,
        kappa,
        l_inv,
        beta,
        samples,
        n_max,
        c_window: (params.c(), c_radius),
        residuals,
        observations,
    })
}

/// A rectangular grid of parameters, row-major with `re` varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: Complex64,
    /// Half extents in `re` and `im`.
    pub half_width: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn spacing(&self) -> (f64, f64) {
        let step = |h: f64, n: usize| if n > 1 { 2.0 * h / (n - 1) as f64 } else { 0.0 };
        (step(self.half_width.0, self.nx), step(self.half_width.1, self.ny))
    }

    pub fn centers(&self) -> Vec<Complex64> {
        let (hx, hy) = self.spacing();
        let x0 = self.center.re - if self.nx > 1 { self.half_width.0 } else { 0.0 };
        let y0 = self.center.im - if self.ny > 1 { self.half_width.1 } else { 0.0 };
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(Complex64::new(x0 + i as f64 * hx, y0 + j as f64 * hy));
            }
        }
        out
    }

    /// A line of `n` parameters from `a` to `b`, as a one-row grid when the
    /// segment is horizontal and a one-column grid otherwise.
    pub fn segment(a: Complex64, b: Complex64, n: usize) -> Result<Self> {
        let mid = 0.5 * (a + b);
        let d = 0.5 * (b - a);
        if d.re != 0.0 && d.im != 0.0 {
            return Err(Error::InvalidArgument("segment must be parallel to an axis".into()));
        }
        let (nx, ny) = if d.im == 0.0 { (n, 1) } else { (1, n) };
        Ok(Self { center: mid, half_width: (d.re.abs(), d.im.abs()), nx, ny })
    }
}

/// Per-cell diagnostics of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub grad: (f64, f64),
    /// `(∂²/∂x², ∂²/∂x∂y, ∂²/∂y²)`.
    pub hessian: (f64, f64, f64),
    /// RMS residual of a least-squares quadratic on the 3×3 neighbourhood.
    pub fit_residual: f64,
    /// `|t*(c) − t*(c̄)|` when `c̄` is on the grid, else NaN.
    pub sym_defect: f64,
}

/// Dimension records over a parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ell: u32,
    pub spec: GridSpec,
    pub centers: Vec<Complex64>,
    pub records: Vec<DimensionRecord>,
    pub cells: Vec<CellDiagnostics>,
}

impl SweepGrid {
    /// Builds a grid from precomputed records and attaches cell diagnostics.
    pub fn from_records(ell: u32, spec: GridSpec, records: Vec<DimensionRecord>) -> Result<Self> {
        let centers = spec.centers();
        if records.len() != centers.len() {
            return Err(Error::InvalidArgument(format!("{} records for {} centers", records.len(), centers.len())));
        }
        let mut grid = Self { ell, spec, centers, records, cells: Vec::new() };
        grid.cells = cell_diagnostics(&grid);
        Ok(grid)
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        self.records[j * self.spec.nx + i].t_star
    }
}

/// A record for a cell whose solve failed: `t_star` is NaN and the kind of
/// error is flagged in the diagnostics.
fn failed_record(params: &MapParams, err: &Error) -> DimensionRecord {
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("failed".to_string(), 1.0);
    diagnostics.insert(
        match err {
            Error::NoBracket { .. } => "no_bracket",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            _ => "other_error",
        }
        .to_string(),
        1.0,
    );
    DimensionRecord {
        ell: params.ell(),
        c: params.c(),
        t_star: f64::NAN,
        uncertainty: f64::NAN,
        bracket: (f64::NAN, f64::NAN),
        evaluations: 0,
        diagnostics,
        trace: Vec::new(),
    }
}

/// Bowen dimension over the grid. Every center must keep `margin` from the
/// boundary of `D(ℓ, 1)`; failed cells are recorded and the sweep goes on.
pub fn sweep_dimension(ell: u32, spec: &GridSpec, accuracy: f64) -> Result<SweepGrid> {
    sweep_dimension_with(ell, spec, accuracy, DEFAULT_MARGIN)
}

pub fn sweep_dimension_with(ell: u32, spec: &GridSpec, accuracy: f64, margin: f64) -> Result<SweepGrid> {
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let centers = spec.centers();
    let l = f64::from(ell);
    if let Some(c) = centers.iter().find(|c| (*c - l).norm() >= 1.0 - margin) {
        return Err(Error::InvalidArgument(format!(
            "center {} is within {margin} of the boundary of D({ell}, 1)",
            crate::dynamics::format_complex(*c)
        )));
    }
    let records: Vec<DimensionRecord> = centers
        .par_iter()
        .map(|c| {
            let params = MapParams::new(ell, *c)?;
            Ok(bowen_dimension(&params, accuracy).unwrap_or_else(|e| failed_record(&params, &e)))
        })
        .collect::<Result<_>>()?;
    SweepGrid::from_records(ell, spec.clone(), records)
}

fn cell_diagnostics(grid: &SweepGrid) -> Vec<CellDiagnostics> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let (hx, hy) = grid.spec.spacing();
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let f = |a: usize, b: usize| grid.value(a, b);
            let deriv = |lo: usize, hi: usize, h: f64, get: &dyn Fn(usize) -> f64| {
                if hi == lo {
                    0.0
                } else {
                    (get(hi) - get(lo)) / (h * (hi - lo) as f64)
                }
            };
            let (il, ir) = (i.saturating_sub(1), (i + 1).min(nx - 1));
            let (jl, jr) = (j.saturating_sub(1), (j + 1).min(ny - 1));
            let gx = deriv(il, ir, hx, &|a| f(a, j));
            let gy = deriv(jl, jr, hy, &|b| f(i, b));
            let second = |n: usize, k: usize, h: f64, get: &dyn Fn(usize) -> f64| {
                if n < 3 {
                    0.0
                } else {
                    let k = k.clamp(1, n - 2);
                    (get(k + 1) - 2.0 * get(k) + get(k - 1)) / (h * h)
                }
            };
            let hxx = second(nx, i, hx, &|a| f(a, j));
            let hyy = second(ny, j, hy, &|b| f(i, b));
            let hxy = if nx > 1 && ny > 1 {
                (f(ir, jr) - f(ir, jl) - f(il, jr) + f(il, jl)) / (hx * hy * ((ir - il) * (jr - jl)) as f64)
            } else {
                0.0
            };
            let c = grid.centers[j * nx + i];
            let sym_defect = grid
                .centers
                .iter()
                .position(|d| (d - c.conj()).norm() < 1e-12 && c.im != 0.0)
                .map_or(f64::NAN, |p| (grid.records[p].t_star - f(i, j)).abs());
            out.push(CellDiagnostics {
                grad: (gx, gy),
                hessian: (hxx, hxy, hyy),
                fit_residual: quadratic_fit_residual(grid, i, j),
                sym_defect,
            });
        }
    }
    out
}

/// RMS residual of the least-squares quadratic in `(Δre, Δim)` over the
/// 3×3 neighbourhood of cell `(i, j)`, clipped to the grid. Monomials in a
/// direction with fewer than three points are left out.
fn quadratic_fit_residual(grid: &SweepGrid, i: usize, j: usize) -> f64 {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let xs: Vec<usize> = (i.saturating_sub(1)..=(i + 1).min(nx - 1)).collect();
    let ys: Vec<usize> = (j.saturating_sub(1)..=(j + 1).min(ny - 1)).collect();
    let c0 = grid.centers[j * nx + i];
    let scale = |d: f64, len: usize| if len > 1 { d } else { 1.0 };
    let hx = scale((grid.centers[xs[xs.len() - 1]] - grid.centers[xs[0]]).re.abs(), xs.len());
    let hy = scale((grid.centers[ys[ys.len() - 1] * nx] - grid.centers[ys[0] * nx]).im.abs(), ys.len());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for &b in &ys {
        for &a in &xs {
            let d = grid.centers[b * nx + a] - c0;
            let d = Complex64::new(d.re / hx, d.im / hy);
            let mut row = vec![1.0];
            if xs.len() > 1 {
                row.push(d.re);
            }
            if ys.len() > 1 {
                row.push(d.im);
            }
            if xs.len() > 2 {
                row.push(d.re * d.re);
            }
            if xs.len() > 1 && ys.len() > 1 {
                row.push(d.re * d.im);
            }
            if ys.len() > 2 {
                row.push(d.im * d.im);
            }
            rows.push(row);
            rhs.push(grid.value(a, b));
        }
    }
    let m = rows.len();
    let p = rows[0].len();
    if rhs.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    if m <= p {
        return 0.0;
    }
    let a = DMatrix::from_fn(m, p, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let Ok(coef) = a.clone().svd(true, true).solve(&b, 1e-14) else {
        return f64::NAN;
    };
    let r = &a * coef - b;
    (r.norm_squared() / m as f64).sqrt()
}

/// Richardson, fit and symmetry diagnostics of a rectangular sweep with at
/// least 5 points per axis.
pub fn smoothness_diagnostic(grid: &SweepGrid) -> Result<BTreeMap<String, f64>> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    if nx.min(ny) < 5 {
        return Err(Error::InsufficientGrid { needed: 5, got: nx.min(ny) });
    }
    let mut out = BTreeMap::new();
    let mut axis = |name: &str, n: usize, m: usize, get: &dyn Fn(usize, usize) -> f64| {
        let mut max_second: f64 = 0.0;
        let mut ratios = Vec::new();
        let mut jumps = Vec::new();
        for line in 0..m {
            for k in 0..n - 1 {
                jumps.push((get(k + 1, line) - get(k, line)).abs());
            }
            for k in 2..n - 2 {
                let d1 = get(k + 1, line) - 2.0 * get(k, line) + get(k - 1, line);
                let d2 = get(k + 2, line) - 2.0 * get(k, line) + get(k - 2, line);
                max_second = max_second.max(d1.abs()).max(d2.abs());
                if d1.abs() > 1e-300 {
                    ratios.push(d2 / d1);
                }
            }
        }
        out.insert(format!("max_second_difference_{name}"), max_second);
        let mean_ratio = if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 };
        out.insert(format!("richardson_ratio_{name}"), mean_ratio);
        let consistent = ratios.iter().all(|r| (r / 4.0 - 1.0).abs() <= 0.3);
        out.insert(format!("richardson_consistent_{name}"), if consistent { 1.0 } else { 0.0 });
        let (max, median) = max_and_median(jumps);
        out.insert(format!("max_jump_{name}"), max);
        out.insert(format!("median_jump_{name}"), median);
    };
    axis("re", nx, ny, &|k, line| grid.value(k, line));
    axis("im", ny, nx, &|k, line| grid.value(line, k));
    let residuals: Vec<f64> = grid.cells.iter().map(|c| c.fit_residual).collect();
    out.insert("max_fit_residual".to_string(), residuals.iter().copied().fold(0.0, f64::max));
    let sym: Vec<f64> = grid.cells.iter().map(|c| c.sym_defect).filter(|d| !d.is_nan()).collect();
    out.insert("max_sym_defect".to_string(), sym.iter().copied().fold(0.0, f64::max));
    out.insert("sym_pairs".to_string(), sym.len() as f64 / 2.0);
    let floor = grid.records.iter().map(|r| r.uncertainty).fold(0.0, f64::max);
    out.insert("uncertainty_floor".to_string(), floor);
    Ok(out)
}

fn max_and_median(mut v: Vec<f64>) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    (v[n - 1], median)
}

/// `|Δt*|` between horizontally and vertically adjacent cells.
pub fn adjacent_jumps(grid: &SweepGrid) -> Vec<f64> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                out.push((grid.value(i + 1, j) - grid.value(i, j)).abs());
            }
            if j + 1 < ny {
                out.push((grid.value(i, j + 1) - grid.value(i, j)).abs());
            }
        }
    }
    out
}

/// Largest and median adjacent jump.
pub fn jump_summary(grid: &SweepGrid) -> (f64, f64) {
    max_and_median(adjacent_jumps(grid))
}

/// `max |Δt*| / |Δc|` over adjacent cells.
pub fn continuity_constant(grid: &SweepGrid) -> f64 {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let (hx, hy) = grid.spec.spacing();
    let mut c: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                c = c.max((grid.value(i + 1, j) - grid.value(i, j)).abs() / hx);
            }
            if j + 1 < ny {
                c = c.max((grid.value(i, j + 1) - grid.value(i, j)).abs() / hy);
            }
        }
    }
    c
}
