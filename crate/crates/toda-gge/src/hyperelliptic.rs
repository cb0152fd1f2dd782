//! The density integral 𝓘(λ⁺; ε) over the Dirichlet domain, its determinant
//! lower bound, the small-N upper envelope, and the closed form for Φ.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_det, log_sum_exp};
use crate::poly::log_vandermonde;
use crate::quad::{sinh_endpoint_nodes, Rule};
use crate::spectral::{membership_an, upsilon, MembershipStatus, SpectralData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    DeterminantQuadrature,
    TensorBruteForce,
    LowerBound,
    UpperEnvelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub log_abs: f64,
    pub sign: f64,
    pub method: Method,
    pub est_error: f64,
}

impl IntegralResult {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

fn require_member(spec: &SpectralData) -> Result<()> {
    let m = membership_an(&spec.lambda_plus, spec.eps)?;
    if m.status != MembershipStatus::Inside {
        return Err(Error::Domain(format!("spectrum not in A_N (margin {:e})", m.margin)));
    }
    Ok(())
}

/// Geometry of K_k = [λ_k^{υ_k}, λ_{k+1}^{υ_k}] and the distances to the
/// opposite-family roots just outside each end.
struct Interval {
    left: f64,
    right: f64,
    delta_left: f64,
    delta_right: f64,
}

fn interval(spec: &SpectralData, k: usize) -> Result<Interval> {
    let n = spec.n();
    let u = upsilon(n, k);
    let own = spec.family(u);
    let other = spec.family(-u);
    let iv = Interval {
        left: own[k - 1],
        right: own[k],
        delta_left: own[k - 1] - other[k - 1],
        delta_right: other[k] - own[k],
    };
    if !(iv.delta_left > 0.0 && iv.delta_right > 0.0 && iv.right > iv.left) {
        return Err(Error::Degenerate(format!("interval {k} has touching endpoints")));
    }
    Ok(iv)
}

/// −½ ln ∏_{i≠e} |μ − λ⁺_i||μ − λ⁻_i| (0-based e).
fn log_rest_weight(spec: &SpectralData, e: usize, mu: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..spec.n() {
        if i == e {
            continue;
        }
        s += ((mu - spec.lambda_plus[i]).abs() * (mu - spec.lambda_minus[i]).abs()).ln();
    }
    -0.5 * s
}

fn chebyshev_row(y: f64, m: usize, out: &mut [f64]) {
    if m == 0 {
        return;
    }
    out[0] = 1.0;
    if m > 1 {
        out[1] = y;
    }
    for j in 2..m {
        out[j] = 2.0 * y * out[j - 1] - out[j - 2];
    }
}

fn determinant_at_order(spec: &SpectralData, order: usize) -> Result<(f64, f64)> {
    let n = spec.n();
    let m = n - 1;
    let rule = Rule::legendre(order);
    let (lo, hi) = spec
        .lambda_plus
        .iter()
        .chain(&spec.lambda_minus)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let c = 0.5 * (lo + hi);
    let s = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let mut mat = DMatrix::zeros(m, m);
    let mut log_scale = 0.0;
    let mut t = vec![0.0; m];
    for k in 1..=m {
        let iv = interval(spec, k)?;
        let half = 0.5 * (iv.right - iv.left);
        let mut pts: Vec<(f64, f64, f64)> = Vec::new();
        for (u, w) in sinh_endpoint_nodes(&rule, iv.delta_left, half) {
            let mu = iv.left + u;
            pts.push((mu, w, log_rest_weight(spec, k - 1, mu)));
        }
        for (u, w) in sinh_endpoint_nodes(&rule, iv.delta_right, half) {
            let mu = iv.right - u;
            pts.push((mu, w, log_rest_weight(spec, k, mu)));
        }
        let col_ref = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
        log_scale += col_ref;
        for &(mu, w, lw) in &pts {
            let f = w * (lw - col_ref).exp();
            chebyshev_row((mu - c) / s, m, &mut t);
            for j in 0..m {
                mat[(j, k - 1)] += f * t[j];
            }
        }
    }
    // q_j = s^j 2^{1−j} T_j((μ − c)/s) is monic
    for j in 1..m {
        log_scale += j as f64 * s.ln() + (1.0 - j as f64) * std::f64::consts::LN_2;
    }
    let d = log_det(&mat);
    Ok((d.log_abs + log_scale, d.sign))
}

/// 𝓘(λ⁺; ε) = det_{N−1}[∫_{K_k} q_{j−1}(μ) dμ/√(P⁺P⁻)] by Andréief, each entry by
/// sinh-mapped Gauss–Legendre panels from both endpoints of K_k.
pub fn integral_i(spec: &SpectralData, quad_order: usize) -> Result<IntegralResult> {
    if quad_order < 8 {
        return Err(Error::Domain(format!("quad_order must be >= 8, got {quad_order}")));
    }
    let n = spec.n();
    if n == 1 {
        return Ok(IntegralResult { log_abs: 0.0, sign: 1.0, method: Method::DeterminantQuadrature, est_error: 0.0 });
    }
    require_member(spec)?;
    let (coarse, _) = determinant_at_order(spec, quad_order)?;
    let (log_abs, sign) = determinant_at_order(spec, 2 * quad_order)?;
    let est_error = (log_abs - coarse).abs();
    if !log_abs.is_finite() || est_error > 1e-4 * log_abs.abs().max(1.0) {
        return Err(Error::Accuracy { est_error, log_abs });
    }
    Ok(IntegralResult { log_abs, sign, method: Method::DeterminantQuadrature, est_error })
}

/// Â: rows k < N hold ln|(λ_{k+1}^{υ_k} − η_s)/(λ_k^{υ_k} − η_s)|, the last row is all ones.
pub fn hat_a_matrix(spec: &SpectralData) -> Result<DMatrix<f64>> {
    let n = spec.n();
    let mut a = DMatrix::from_element(n, n, 1.0);
    for k in 1..n {
        let own = spec.family(upsilon(n, k));
        for s in 0..n {
            let num = (own[k] - spec.eta[s]).abs();
            let den = (own[k - 1] - spec.eta[s]).abs();
            if num == 0.0 || den == 0.0 {
                return Err(Error::Degenerate(format!("eta_{} coincides with an endpoint of K_{k}", s + 1)));
            }
            a[(k - 1, s)] = (num / den).ln();
        }
    }
    Ok(a)
}

/// N·det_{N−1}[A]/Δ(η), a lower bound for 𝓘.
pub fn lower_bound_det_a(spec: &SpectralData) -> Result<IntegralResult> {
    let n = spec.n();
    require_member(spec)?;
    let hat = hat_a_matrix(spec)?;
    let a = hat.view((0, 0), (n - 1, n - 1)).into_owned();
    let d = log_det(&a);
    Ok(IntegralResult {
        log_abs: d.log_abs + (n as f64).ln() - log_vandermonde(&spec.eta),
        sign: d.sign,
        method: Method::LowerBound,
        est_error: 0.0,
    })
}

/// ln Φ(Δ/(2δ)) with Φ(x) = 2x + 1 + 2√(x(1+x)), i.e. 2 asinh √(Δ/(2δ)).
pub fn phi_diag_element(delta: f64, big_delta: f64) -> f64 {
    2.0 * (big_delta / (2.0 * delta)).sqrt().asinh()
}

pub const ENVELOPE_MAX_N: usize = 12;

fn envelope_at_order(spec: &SpectralData, order: usize) -> Result<f64> {
    let n = spec.n();
    let rule = Rule::legendre(order);
    let mut total = 0.0;
    for vs in [1i32, -1] {
        let fam = spec.family(vs);
        // cols[j][σ] is column j (0-based) of M_σ for that half
        let mut cols: Vec<[Vec<f64>; 2]> = Vec::with_capacity(n - 1);
        for j in 1..n {
            let u = upsilon(n, j);
            let own = spec.family(u);
            let other = spec.family(-u);
            let big_delta = own[j] - own[j - 1];
            let mut pair: [Vec<f64>; 2] = [vec![0.0; n], vec![0.0; n]];
            for sigma in 0..2usize {
                let e = j - 1 + sigma;
                let endpoint = own[e];
                let delta = (endpoint - other[e]).abs();
                if delta == 0.0 {
                    return Err(Error::Degenerate(format!("delta_{} vanishes", e + 1)));
                }
                let dir = if sigma == 0 { 1.0 } else { -1.0 };
                let nodes = sinh_endpoint_nodes(&rule, delta, 0.5 * big_delta);
                for i in 0..n {
                    pair[sigma][i] = if i == e {
                        phi_diag_element(delta, big_delta)
                    } else {
                        nodes
                            .iter()
                            .map(|&(uu, w)| {
                                let mu = endpoint + dir * uu;
                                let num = if vs == u { dir * uu } else { dir * (uu + delta) };
                                w * num / (mu - fam[i])
                            })
                            .sum()
                    };
                }
            }
            cols.push(pair);
        }
        let terms: Vec<f64> = (0..1usize << (n - 1))
            .map(|mask| {
                let m = DMatrix::from_fn(n, n, |i, j| if j == n - 1 { 1.0 } else { cols[j][(mask >> j) & 1][i] });
                log_det(&m).log_abs
            })
            .collect();
        total += 0.5 * (log_sum_exp(&terms) - log_vandermonde(fam));
    }
    Ok(total)
}

/// ∏_ς (𝒮^ς/Δ(λ^ς))^{1/2} with 𝒮^ς = Σ_σ |det M_σ^ς|, an upper bound for 𝓘.
pub fn upper_envelope(spec: &SpectralData) -> Result<IntegralResult> {
    let n = spec.n();
    if n > ENVELOPE_MAX_N {
        return Err(Error::Size(format!("upper envelope limited to N <= {ENVELOPE_MAX_N}, got {n}")));
    }
    if n == 1 {
        return Ok(IntegralResult { log_abs: 0.0, sign: 1.0, method: Method::UpperEnvelope, est_error: 0.0 });
    }
    require_member(spec)?;
    let coarse = envelope_at_order(spec, 16)?;
    let log_abs = envelope_at_order(spec, 32)?;
    Ok(IntegralResult { log_abs, sign: 1.0, method: Method::UpperEnvelope, est_error: (log_abs - coarse).abs() })
}

/// Log of |ln ε|^N/Δ(λ⁺) · exp{Σ_j ln[1 + (2/ℓ)(1/N)Σ_{k≠j} ln|λ⁺_k − λ⁻_j|]}.
///
/// Returns −∞ when an interaction bracket is not positive.
pub fn heuristic_asymptotic(spec: &SpectralData, ell: f64) -> Result<f64> {
    require_member(spec)?;
    let n = spec.n();
    let nf = n as f64;
    let mut acc = nf * (-spec.eps.ln()).abs().ln() - log_vandermonde(&spec.lambda_plus);
    for j in 0..n {
        let u: f64 =
            (0..n).filter(|&k| k != j).map(|k| (spec.lambda_plus[k] - spec.lambda_minus[j]).abs().ln()).sum::<f64>()
                / nf;
        let bracket = 1.0 + 2.0 / ell * u;
        if !(bracket > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        acc += bracket.ln();
    }
    Ok(acc)
}
