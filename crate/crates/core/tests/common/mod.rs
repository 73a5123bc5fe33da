use std::f64::consts::{PI, TAU};

use bowen_dim::dynamics::evaluate;
use bowen_dim::{CylinderPoint, MapParams};
use num_complex::Complex64;

/// Newton on `F(x) = w` from a dense seed grid, deduplicated, keeping roots
/// with `Re x` in `re` and lift index `|k| ≤ k_max`.
pub fn grid_oracle(params: &MapParams, w: CylinderPoint, re: (f64, f64), k_max: i64, h: f64) -> Vec<Complex64> {
    let l = params.ell_f64();
    let mut out: Vec<Complex64> = Vec::new();
    let mut x0 = re.0;
    while x0 <= re.1 {
        let mut y0 = -PI + 0.5 * h;
        while y0 < PI {
            let mut x = Complex64::new(x0, y0);
            for _ in 0..80 {
                let mut g = params.lift(x) - w.lift();
                g.im -= TAU * (g.im / TAU).round();
                let d = l - x.exp();
                // double roots: converge onto the zero of F' instead
                let step = if d.norm() < 1e-3 { d / -x.exp() } else { g / d };
                if !step.is_finite() {
                    break;
                }
                x -= step;
            }
            let q = CylinderPoint::from_complex(x);
            if q.is_finite() && evaluate(params, q).distance(&w) < 1e-11 && q.re() >= re.0 && q.re() <= re.1 {
                let xl = q.lift();
                let k = ((l * xl - xl.exp() - params.preimage_rhs(w, 0)).im / TAU).round() as i64;
                if k.abs() <= k_max && !out.iter().any(|o| CylinderPoint::from_complex(*o).distance(&q) < 1e-7) {
                    out.push(xl);
                }
            }
            y0 += h;
        }
        x0 += h;
    }
    out
}
