//! The map family `f(z) = ℓz + c − (ℓ−1)·log c − e^z`, its projection `F`
//! to the cylinder `ℂ / 2πiℤ`, derivatives, fixed points and the Fatou
//! trichotomy classifier.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;

/// Parameters `(ℓ, c)` of one member of the family.
///
/// Invariants: `ℓ ≥ 2` and `|c − ℓ| < 1`, so `Re c > 0` and the principal
/// logarithm of `c` is well defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    ell: u32,
    c: Complex64,
    /// `c − (ℓ−1)·Log c`, the constant term of `f`.
    offset: Complex64,
    log_c: Complex64,
}

impl MapParams {
    pub fn new(ell: u32, c: Complex64) -> Result<Self> {
        if ell < 2 {
            return Err(Error::InvalidParams(format!("ell must be >= 2, got {ell}")));
        }
        if !(c.re.is_finite() && c.im.is_finite()) || (c - f64::from(ell)).norm() >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "c = {c} must lie in the open disk D({ell}, 1)"
            )));
        }
        let log_c = c.ln();
        let offset = c - f64::from(ell - 1) * log_c;
        Ok(Self { ell, c, offset, log_c })
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn ell_f64(&self) -> f64 {
        f64::from(self.ell)
    }

    pub fn c(&self) -> Complex64 {
        self.c
    }

    /// The attracting fixed point `log c` (principal branch).
    pub fn log_c(&self) -> Complex64 {
        self.log_c
    }

    /// Constant term `c − (ℓ−1)·Log c`.
    pub fn offset(&self) -> Complex64 {
        self.offset
    }

    /// Multiplier `λ = ℓ − c` of the attracting fixed point.
    pub fn multiplier(&self) -> Complex64 {
        self.ell_f64() - self.c
    }

    /// Same `ℓ`, conjugated `c`.
    pub fn conj(&self) -> Self {
        Self::new(self.ell, self.c.conj()).expect("conjugate parameter stays in the disk")
    }

    /// Same `ℓ` with a new `c`.
    pub fn with_c(&self, c: Complex64) -> Result<Self> {
        Self::new(self.ell, c)
    }

    /// Distance from `c` to the boundary of `D(ℓ, 1)`.
    pub fn boundary_margin(&self) -> f64 {
        1.0 - (self.c - self.ell_f64()).norm()
    }

    /// The lift `f_c` on `ℂ`.
    pub fn lift(&self, z: Complex64) -> Complex64 {
        self.ell_f64() * z + self.offset - z.exp()
    }

    /// Right-hand side `B_k = w + 2πik − c + (ℓ−1)·Log c` of the preimage
    /// equation `ℓx − e^x = B_k`.
    pub fn preimage_rhs(&self, w: CylinderPoint, k: i64) -> Complex64 {
        w.lift() + Complex64::new(0.0, TAU * k as f64) - self.offset
    }
}

impl fmt::Display for MapParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ell={} c={}", self.ell, format_complex(self.c))
    }
}

/// Formats `a+bi` / `a-bi`, the same grammar [`parse_complex`] accepts.
pub fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Parses `a+bi`, `a-bi`, `a`, or `bi` (no spaces).
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if s.is_empty() || s.contains(char::is_whitespace) {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // Split at the last sign that is not the leading sign and not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().ok()?;
            let im_str = &body[i..];
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                _ => im_str.parse::<f64>().ok()?,
            };
            Some(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse::<f64>().ok()?,
            };
            Some(Complex64::new(0.0, im))
        }
    }
}

/// A point of the cylinder `Q = ℂ / 2πiℤ`, stored as its representative with
/// imaginary part in `(−π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderPoint {
    re: f64,
    im: f64,
}

/// Reduces an imaginary part into `(−π, π]`.
pub fn canonical_im(y: f64) -> f64 {
    if y > -PI && y <= PI {
        return y;
    }
    let r = y.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

impl CylinderPoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im: canonical_im(im) }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    /// The canonical lift in the strip `Im ∈ (−π, π]`.
    pub fn lift(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// `d([z],[w]) = min_k |z − w + 2πik|`.
    pub fn distance(&self, other: &CylinderPoint) -> f64 {
        let dre = self.re - other.re;
        let dim = canonical_im(self.im - other.im);
        dre.hypot(dim)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re, -self.im)
    }
}

impl From<Complex64> for CylinderPoint {
    fn from(z: Complex64) -> Self {
        Self::from_complex(z)
    }
}

/// `F_c(z)` on the cylinder.
pub fn evaluate(params: &MapParams, z: CylinderPoint) -> CylinderPoint {
    CylinderPoint::from_complex(params.lift(z.lift()))
}

/// `F_c'(z) = ℓ − e^z`.
pub fn derivative(params: &MapParams, z: CylinderPoint) -> Complex64 {
    params.ell_f64() - z.lift().exp()
}

/// `∂f_c(z)/∂c = 1 − (ℓ−1)/c`, independent of `z`.
pub fn param_derivative(params: &MapParams, _z: CylinderPoint) -> Complex64 {
    param_derivative_at(params.ell, params.c)
}

/// `1 − (ℓ−1)/c` for any nonzero `c`.
pub fn param_derivative_at(ell: u32, c: Complex64) -> Complex64 {
    1.0 - f64::from(ell - 1) / c
}

/// A derivative of an iterate kept as `direction · e^{log_modulus}` so that
/// long orbits never overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDerivative {
    pub log_modulus: f64,
    /// Unit complex number (or zero when the derivative vanishes).
    pub direction: Complex64,
}

impl LogDerivative {
    pub const ONE: LogDerivative = LogDerivative { log_modulus: 0.0, direction: Complex64 { re: 1.0, im: 0.0 } };

    pub fn from_complex(d: Complex64) -> Self {
        let m = d.norm();
        if m == 0.0 {
            Self { log_modulus: f64::NEG_INFINITY, direction: Complex64::new(0.0, 0.0) }
        } else {
            Self { log_modulus: m.ln(), direction: d / m }
        }
    }

    pub fn mul(self, d: Complex64) -> Self {
        let other = Self::from_complex(d);
        Self { log_modulus: self.log_modulus + other.log_modulus, direction: self.direction * other.direction }
    }

    /// The plain complex value; may overflow to infinity.
    pub fn to_complex(self) -> Complex64 {
        self.direction * self.log_modulus.exp()
    }

    pub fn modulus(self) -> f64 {
        self.log_modulus.exp()
    }
}

/// `(F_c^n)'(z)` as a product along the orbit.
pub fn orbit_derivative(params: &MapParams, z: CylinderPoint, n: usize) -> LogDerivative {
    let mut acc = LogDerivative::ONE;
    let mut x = z;
    for _ in 0..n {
        acc = acc.mul(derivative(params, x));
        x = evaluate(params, x);
    }
    acc
}

/// `F_c^n(z)`.
pub fn iterate(params: &MapParams, z: CylinderPoint, n: usize) -> CylinderPoint {
    (0..n).fold(z, |x, _| evaluate(params, x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitTag {
    AttractedToLogC,
    BakerEscape,
    EscapePlusInfinity,
    Unresolved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitClass {
    pub tag: OrbitTag,
    pub iterations_used: usize,
}

/// `Re z` above which an orbit is a candidate for escape to `+∞`.
pub fn escape_threshold(ell: u32) -> f64 {
    50f64.max(10.0 * f64::from(ell))
}

/// Consecutive growing iterates above [`escape_threshold`] required to tag
/// [`OrbitTag::EscapePlusInfinity`].
pub const ESCAPE_CONFIRMATION: usize = 5;

/// Radius around `log c` that is forward invariant and contracted, capped
/// at 0.05.
///
/// With `δ = z − log c`, `F(z) − log c = λδ − c(e^δ − 1 − δ)` and
/// `|e^δ − 1 − δ| ≤ 0.53|δ|²` for `|δ| ≤ 0.05`.
pub fn default_basin_radius(params: &MapParams) -> f64 {
    let lambda = params.multiplier().norm();
    let r = 0.9 * (1.0 - lambda) / (0.53 * params.c().norm());
    r.min(0.05)
}

/// Follows the orbit of `z` until it provably enters one of the two Fatou
/// basins, escapes to `+∞`, or the budget runs out.
pub fn classify_orbit(params: &MapParams, z: CylinderPoint, max_iter: usize, radius_eps: f64) -> OrbitClass {
    let fixed = CylinderPoint::from_complex(params.log_c());
    let baker = -2.0 * params.ell_f64();
    let threshold = escape_threshold(params.ell());
    let mut x = z.lift();
    let mut growing = 0usize;
    for i in 0..=max_iter {
        if x.re < baker {
            return OrbitClass { tag: OrbitTag::BakerEscape, iterations_used: i };
        }
        if CylinderPoint::from_complex(x).distance(&fixed) < radius_eps {
            return OrbitClass { tag: OrbitTag::AttractedToLogC, iterations_used: i };
        }
        if growing >= ESCAPE_CONFIRMATION {
            return OrbitClass { tag: OrbitTag::EscapePlusInfinity, iterations_used: i };
        }
        if i == max_iter {
            break;
        }
        let next = params.lift(x);
        if next.re.is_nan() {
            break;
        }
        if next.re == f64::NEG_INFINITY {
            return OrbitClass { tag: OrbitTag::BakerEscape, iterations_used: i + 1 };
        }
        if next.re == f64::INFINITY {
            // e^z overflowed with Re(e^z) → −∞: growth beyond any finite window.
            if x.re > threshold {
                return OrbitClass { tag: OrbitTag::EscapePlusInfinity, iterations_used: i + 1 };
            }
            break;
        }
        if next.re > threshold && next.re > x.re {
            growing += 1;
        } else {
            growing = 0;
        }
        x = Complex64::new(next.re, canonical_im(next.im));
    }
    OrbitClass { tag: OrbitTag::Unresolved, iterations_used: max_iter }
}

/// A validated periodic point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: CylinderPoint,
    pub period: usize,
    pub multiplier: Complex64,
    /// Inverse-branch word the point was found with; empty for direct Newton.
    pub branch_word: Vec<crate::preimage::Branch>,
}

impl PeriodicPoint {
    /// `d(F^period(point), point)`.
    pub fn residual(&self, params: &MapParams) -> f64 {
        iterate(params, self.point, self.period).distance(&self.point)
    }

    pub fn is_repelling(&self) -> bool {
        self.multiplier.norm() > 1.0
    }
}

/// Fixed points found for a range of lift indices.
#[derive(Clone, Debug, Default)]
pub struct FixedPointReport {
    pub points: Vec<PeriodicPoint>,
    /// Lift indices for which no solution was found in the strip.
    pub non_convergence: Vec<i64>,
}

/// Solves `F_c(p) = p` on the cylinder for lift indices `k` in `k_range`,
/// i.e. `(ℓ−1)p − e^p = 2πik − c + (ℓ−1)·Log c` with `p` in the strip.
pub fn fixed_points(params: &MapParams, k_range: std::ops::RangeInclusive<i64>, tol: f64) -> Result<FixedPointReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTol(tol));
    }
    let k_max = k_range.start().abs().max(k_range.end().abs());
    let roots = roots::strip_roots(params.ell() - 1, -params.offset(), k_max);
    let mut report = FixedPointReport::default();
    for k in k_range.clone() {
        if !roots.iter().any(|r| r.k == k) {
            report.non_convergence.push(k);
        }
    }
    for r in roots.into_iter().filter(|r| k_range.contains(&r.k)) {
        let p = CylinderPoint::from_complex(r.x);
        if evaluate(params, p).distance(&p) >= tol {
            report.non_convergence.push(r.k);
            continue;
        }
        report.points.push(PeriodicPoint {
            point: p,
            period: 1,
            multiplier: derivative(params, p),
            branch_word: Vec::new(),
        });
    }
    report.non_convergence.sort_unstable();
    report.non_convergence.dedup();
    report.points.sort_by(|a, b| a.point.re.total_cmp(&b.point.re).then(a.point.im.total_cmp(&b.point.im)));
    Ok(report)
}

/// The repelling fixed point with lift index `k`, `f(p) = p + 2πik`; the
/// one with the largest real part if there are several.
pub fn repelling_fixed_point(params: &MapParams, k: i64) -> Option<PeriodicPoint> {
    roots::strip_roots(params.ell() - 1, -params.offset(), k.abs())
        .into_iter()
        .filter(|r| r.k == k)
        .map(|r| CylinderPoint::from_complex(r.x))
        .filter(|p| derivative(params, *p).norm() > 1.0)
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .map(|p| PeriodicPoint { point: p, period: 1, multiplier: derivative(params, p), branch_word: Vec::new() })
}
