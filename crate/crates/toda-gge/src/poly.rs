//! Monic polynomials in product form, evaluated as log-magnitude plus sign.

use crate::error::{Error, Result};
use crate::linalg::LogSign;

/// ∏_k (x − r_k).
pub fn prod_eval(roots: &[f64], x: f64) -> LogSign {
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for &r in roots {
        let d = x - r;
        if d == 0.0 {
            return LogSign { log_abs: f64::NEG_INFINITY, sign: 0.0 };
        }
        log_abs += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
    }
    LogSign { log_abs, sign }
}

/// P′(r_a) = ∏_{j≠a} (r_a − r_j).
pub fn derivative_at_root(roots: &[f64], a: usize) -> LogSign {
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for (j, &r) in roots.iter().enumerate() {
        if j == a {
            continue;
        }
        let d = roots[a] - r;
        if d == 0.0 {
            return LogSign { log_abs: f64::NEG_INFINITY, sign: 0.0 };
        }
        log_abs += d.abs().ln();
        if d < 0.0 {
            sign = -sign;
        }
    }
    LogSign { log_abs, sign }
}

/// ln Δ(x) = Σ_{i<j} ln|x_j − x_i|.
pub fn log_vandermonde(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..x.len() {
        for i in 0..j {
            s += (x[j] - x[i]).abs().ln();
        }
    }
    s
}

pub fn is_strictly_increasing(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite()) && x.windows(2).all(|w| w[0] < w[1])
}

fn log_derivative(roots: &[f64], x: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut dg = 0.0;
    for &r in roots {
        let inv = 1.0 / (x - r);
        g += inv;
        dg -= inv * inv;
    }
    (g, dg)
}

/// Roots of P′ for P = ∏(x − r_k), one in each gap (r_k, r_{k+1}).
///
/// Inside a gap P′/P = Σ 1/(x − r_k) decreases strictly from +∞ to −∞, so a
/// safeguarded Newton iteration on it cannot miss.
pub fn critical_points(roots: &[f64]) -> Result<Vec<f64>> {
    if !is_strictly_increasing(roots) {
        return Err(Error::Domain("roots must be strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(roots.len().saturating_sub(1));
    for k in 0..roots.len().saturating_sub(1) {
        let (mut lo, mut hi) = (roots[k], roots[k + 1]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..400 {
            let (g, dg) = log_derivative(roots, x);
            if g == 0.0 {
                break;
            }
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut nx = x - g / dg;
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            let done = (nx - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
            x = nx;
            if done || nx == lo || nx == hi {
                break;
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Q(x)/|c| for Q = ∏(x − r_k) + c, with the magnitude capped to stay finite.
fn shifted_scaled(roots: &[f64], c: f64, x: f64) -> (f64, f64) {
    let p = prod_eval(roots, x);
    let sc = c.signum();
    if p.sign == 0.0 {
        return (sc, 0.0);
    }
    let r = (p.log_abs - c.abs().ln()).min(700.0);
    let pv = p.sign * r.exp();
    let (g, _) = log_derivative(roots, x);
    (pv + sc, pv * g)
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Real roots of ∏(x − r_k) + c, ascending.
///
/// Between consecutive critical points the shifted polynomial is monotone, so each
/// of the N pieces (with outer brackets) must show one sign change; otherwise the
/// shifted polynomial has complex roots and a domain error is returned.
pub fn shifted_roots(roots: &[f64], c: f64) -> Result<Vec<f64>> {
    let n = roots.len();
    if !is_strictly_increasing(roots) {
        return Err(Error::Domain("roots must be strictly increasing".into()));
    }
    if c == 0.0 {
        return Ok(roots.to_vec());
    }
    if !c.is_finite() {
        return Err(Error::Domain("shift must be finite".into()));
    }
    if n == 1 {
        return Ok(vec![roots[0] - c]);
    }
    let zeta = critical_points(roots)?;
    let d = 1.01 * c.abs().powf(1.0 / n as f64);
    let left = roots[0] - d - 1e-12 * (1.0 + roots[0].abs());
    let right = roots[n - 1] + d + 1e-12 * (1.0 + roots[n - 1].abs());
    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(left);
    bounds.extend_from_slice(&zeta);
    bounds.push(right);
    let signs: Vec<i8> = bounds.iter().map(|&x| sign_of(shifted_scaled(roots, c, x).0)).collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (sl, sh) = (signs[k], signs[k + 1]);
        if sl == 0 || sh == 0 || sl == sh {
            return Err(Error::Domain(format!(
                "shifted polynomial has no simple real root between brackets {k} and {}",
                k + 1
            )));
        }
        let (mut lo, mut hi) = (bounds[k], bounds[k + 1]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..400 {
            let (q, dq) = shifted_scaled(roots, c, x);
            let s = sign_of(q);
            if s == 0 {
                break;
            }
            if s == sl {
                lo = x;
            } else {
                hi = x;
            }
            let mut nx = if dq != 0.0 && dq.is_finite() { x - q / dq } else { f64::NAN };
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            let done = (nx - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
            x = nx;
            if done || nx == lo || nx == hi {
                break;
            }
        }
        out.push(x);
    }
    Ok(out)
}
