//! Periodic, antiperiodic and Dirichlet spectra and the polynomial root web
//! λ⁺, λ⁻, η, ζ tied together by P = P⁺ + 2ε and P⁻ = P⁺ + 4ε.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_det, sym_eigenvalues};
use crate::poly::{
    critical_points, derivative_at_root, is_strictly_increasing, log_vandermonde, prod_eval, shifted_roots,
};
use crate::toda::{lax_matrix, FlaschkaState, Sign};

/// The four interlinked root families plus the optional Dirichlet spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub lambda_plus: Vec<f64>,
    pub lambda_minus: Vec<f64>,
    pub eta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub mu: Option<Vec<f64>>,
    pub eps: f64,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.lambda_plus.len()
    }

    /// Build the web from η, with λ^± the roots of P ∓ 2ε.
    pub fn from_eta(eta: &[f64], eps: f64) -> Result<Self> {
        if !is_strictly_increasing(eta) {
            return Err(Error::Domain("eta must be strictly increasing".into()));
        }
        let lambda_plus = shifted_roots(eta, -2.0 * eps).map_err(|_| Error::NotInAN { margin: f64::NAN })?;
        roots_from_lambda_plus(&lambda_plus, eps)
    }

    /// Spectral data of a chain state, with ε = ∏a and the Dirichlet spectrum filled.
    pub fn from_state(state: &FlaschkaState) -> Result<Self> {
        let lp = eig_periodic(state, Sign::Plus)?;
        let mut sd = roots_from_lambda_plus(&lp, state.prod_a())?;
        if state.n() >= 3 {
            sd.mu = Some(dirichlet_spectrum(state)?);
        }
        Ok(sd)
    }

    /// λ^υ for υ = ±1, as a slice.
    pub fn family(&self, upsilon: i32) -> &[f64] {
        if upsilon > 0 {
            &self.lambda_plus
        } else {
            &self.lambda_minus
        }
    }
}

/// υ_k = (−1)^{N−k} for 1-based k.
pub fn upsilon(n: usize, k: usize) -> i32 {
    if (n - k) % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn eig_periodic(state: &FlaschkaState, sign: Sign) -> Result<Vec<f64>> {
    sym_eigenvalues(lax_matrix(state, sign))
}

/// Eigenvalues of L with its first row and column deleted.
pub fn dirichlet_spectrum(state: &FlaschkaState) -> Result<Vec<f64>> {
    let n = state.n();
    if n < 3 {
        return Err(Error::Size(format!("Dirichlet spectrum needs N >= 3, got {n}")));
    }
    let m = n - 1;
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        d[(i, i)] = state.b()[i + 1];
    }
    for i in 0..m - 1 {
        d[(i, i + 1)] = state.a()[i + 1];
        d[(i + 1, i)] = state.a()[i + 1];
    }
    sym_eigenvalues(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipStatus {
    Inside,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub status: MembershipStatus,
    /// min_j (−1)^{N−j} P(ζ_j)/(2ε) − 1; equals min_j |P(ζ_j)|/(2ε) − 1 inside the set.
    pub margin: f64,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        self.status == MembershipStatus::Inside
    }
}

pub const BOUNDARY_MARGIN: f64 = 1e-12;

/// Whether P⁺ + 4ε has N real simple roots, i.e. λ⁺ ∈ 𝒜_N.
pub fn membership_an(lambda_plus: &[f64], eps: f64) -> Result<Membership> {
    if !is_strictly_increasing(lambda_plus) {
        return Err(Error::Domain("lambda_plus must be strictly increasing".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain("eps must be positive".into()));
    }
    let n = lambda_plus.len();
    let zeta = critical_points(lambda_plus)?;
    let ln2e = (2.0 * eps).ln();
    let mut margin = f64::INFINITY;
    for (j0, &z) in zeta.iter().enumerate() {
        let p = prod_eval(lambda_plus, z);
        let ratio = (p.log_abs - ln2e).exp();
        let s = upsilon(n, j0 + 1) as f64;
        margin = margin.min(ratio + s - 1.0);
    }
    let status = if margin > BOUNDARY_MARGIN {
        MembershipStatus::Inside
    } else if margin >= -BOUNDARY_MARGIN {
        MembershipStatus::Boundary
    } else {
        MembershipStatus::Outside
    };
    Ok(Membership { status, margin })
}

/// η = roots of P⁺ + 2ε, λ⁻ = roots of P⁺ + 4ε, ζ = roots of P′.
pub fn roots_from_lambda_plus(lambda_plus: &[f64], eps: f64) -> Result<SpectralData> {
    let m = membership_an(lambda_plus, eps)?;
    if m.status == MembershipStatus::Outside {
        return Err(Error::NotInAN { margin: m.margin });
    }
    let not_in = |_| Error::NotInAN { margin: m.margin };
    let eta = shifted_roots(lambda_plus, 2.0 * eps).map_err(not_in)?;
    let lambda_minus = shifted_roots(lambda_plus, 4.0 * eps).map_err(not_in)?;
    let zeta = critical_points(lambda_plus)?;
    Ok(SpectralData { lambda_plus: lambda_plus.to_vec(), lambda_minus, eta, zeta, mu: None, eps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterlacingReport {
    pub ok: bool,
    /// Largest amount by which an ordering constraint is violated (≤ 0 when satisfied).
    pub worst_violation: f64,
}

/// Checks μ_k ∈ [λ_k^{υ_k}, λ_{k+1}^{υ_k}] together with the opposite family sitting
/// outside each interval, i.e. the full chain λ⁺_N > λ⁻_N ≥ μ_{N−1} ≥ λ⁻_{N−1} > λ⁺_{N−1} ≥ …
pub fn check_interlacing(lp: &[f64], lm: &[f64], mu: &[f64], tol: f64) -> InterlacingReport {
    let n = lp.len();
    let mut worst = f64::NEG_INFINITY;
    let mut le = |x: f64, y: f64| {
        // x ≤ y up to a tolerance scaled by magnitude
        let v = (x - y) / (1.0 + x.abs().max(y.abs()));
        worst = worst.max(v);
    };
    for k in 1..n {
        let (own, other) = if upsilon(n, k) > 0 { (lp, lm) } else { (lm, lp) };
        if let Some(&m) = mu.get(k - 1) {
            le(own[k - 1], m);
            le(m, own[k]);
        }
        le(other[k - 1], own[k - 1]);
        le(own[k], other[k]);
    }
    InterlacingReport { ok: worst <= tol, worst_violation: worst }
}

/// Henrici–Kappeler bound 2π e^{−ℓ/2}/N on max_k |λ⁺_k − λ⁻_k|.
pub fn kappeler_bound(n: usize, ell: f64) -> f64 {
    2.0 * std::f64::consts::PI * (-ell / 2.0).exp() / n as f64
}

/// First-order approximation λ_a^± ≈ η_a ± 2ε/P′(η_a).
pub fn lambda_expansion(eta: &[f64], eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !is_strictly_increasing(eta) {
        return Err(Error::Domain("eta must be strictly increasing".into()));
    }
    let ln2e = (2.0 * eps).ln();
    let mut plus = Vec::with_capacity(eta.len());
    let mut minus = Vec::with_capacity(eta.len());
    for a in 0..eta.len() {
        let d = derivative_at_root(eta, a);
        if d.log_abs < f64::MIN_POSITIVE.ln() || d.sign == 0.0 {
            return Err(Error::Degenerate(format!("P'(eta_{}) underflows", a + 1)));
        }
        let shift = d.sign * (ln2e - d.log_abs).exp();
        plus.push(eta[a] + shift);
        minus.push(eta[a] - shift);
    }
    Ok((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootMap {
    /// λ⁺ as the roots of P⁻ − 4ε.
    MinusToPlus,
    /// λ⁺ as the roots of P − 2ε.
    EtaToPlus,
}

impl RootMap {
    pub fn shift(self, eps: f64) -> f64 {
        match self {
            RootMap::MinusToPlus => -4.0 * eps,
            RootMap::EtaToPlus => -2.0 * eps,
        }
    }
}

/// The root map source ↦ λ⁺.
pub fn root_map(source: &[f64], eps: f64, which: RootMap) -> Result<Vec<f64>> {
    shifted_roots(source, which.shift(eps))
}

/// |det D_source λ⁺| = Δ(source)/Δ(λ⁺).
pub fn jacobian_ratio(source: &[f64], eps: f64, which: RootMap) -> Result<f64> {
    if !is_strictly_increasing(source) {
        return Err(Error::Domain("source must be strictly increasing".into()));
    }
    let image = root_map(source, eps, which)?;
    Ok((log_vandermonde(source) - log_vandermonde(&image)).exp())
}

/// |det| of the central-difference Jacobian of [`root_map`], step 1e−6 times the source scale.
pub fn fd_jacobian_det(source: &[f64], eps: f64, which: RootMap) -> Result<f64> {
    let n = source.len();
    let h = 1e-6 * source.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut up = source.to_vec();
        let mut dn = source.to_vec();
        up[c] += h;
        dn[c] -= h;
        let (fu, fd) = (root_map(&up, eps, which)?, root_map(&dn, eps, which)?);
        for r in 0..n {
            j[(r, c)] = (fu[r] - fd[r]) / (2.0 * h);
        }
    }
    Ok(log_det(&j).log_abs.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueReport {
    /// |∏|P′(η_k)| / (N^N ∏|P(ζ_j)|) − 1|.
    pub product_residual: f64,
    /// ln(N·min|P′(η)|) − ((N−1)/N)·ln(min|P(ζ)|); the inequality holds when ≥ 0.
    pub young_slack: f64,
    /// min_k of ln(4|P(ζ_k)|/|η_k − η_{k+1}|) − ½ ln|P′(η_k)P′(η_{k+1})|.
    pub neighbour_slack: f64,
}

impl CriticalValueReport {
    /// The neighbour inequality is an equality at N = 2, so slacks get the same tolerance.
    pub fn holds(&self, tol: f64) -> bool {
        self.product_residual <= tol && self.young_slack >= -tol && self.neighbour_slack >= -tol
    }
}

/// The product identity and the two inequalities relating P′(η) and P(ζ).
pub fn critical_value_identities(eta: &[f64]) -> Result<CriticalValueReport> {
    let n = eta.len();
    if n < 2 {
        return Err(Error::Size("critical-value identities need N >= 2".into()));
    }
    if !is_strictly_increasing(eta) {
        return Err(Error::Domain("eta must be strictly increasing".into()));
    }
    let zeta = critical_points(eta)?;
    let dp: Vec<f64> = (0..n).map(|a| derivative_at_root(eta, a).log_abs).collect();
    let pz: Vec<f64> = zeta.iter().map(|&z| prod_eval(eta, z).log_abs).collect();
    let lhs: f64 = dp.iter().sum();
    let rhs = n as f64 * (n as f64).ln() + pz.iter().sum::<f64>();
    let product_residual = (lhs - rhs).exp_m1().abs();
    let min_dp = dp.iter().copied().fold(f64::INFINITY, f64::min);
    let min_pz = pz.iter().copied().fold(f64::INFINITY, f64::min);
    let young_slack = (n as f64).ln() + min_dp - (n as f64 - 1.0) / n as f64 * min_pz;
    let neighbour_slack = (0..n - 1)
        .map(|k| (4.0f64).ln() + pz[k] - (eta[k + 1] - eta[k]).ln() - 0.5 * (dp[k] + dp[k + 1]))
        .fold(f64::INFINITY, f64::min);
    Ok(CriticalValueReport { product_residual, young_slack, neighbour_slack })
}

fn check_distinct(x: &[f64]) -> Result<()> {
    for j in 0..x.len() {
        if !x[j].is_finite() {
            return Err(Error::Domain("entries must be finite".into()));
        }
        for i in 0..j {
            if x[i] == x[j] {
                return Err(Error::Degenerate(format!("duplicate entries at {} and {}", i + 1, j + 1)));
            }
        }
    }
    Ok(())
}

/// A(x)_{ij} = 1_{i≤j} ∏_{m=i..N, m≠j} 1/(x_j − x_m).
pub fn matrix_a(x: &[f64]) -> Result<DMatrix<f64>> {
    check_distinct(x)?;
    let n = x.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i > j {
            return 0.0;
        }
        (i..n).filter(|&m| m != j).map(|m| 1.0 / (x[j] - x[m])).product()
    }))
}

/// Closed-form inverse B_{ij} = 1_{i≤j} ∏_{k=j+1..N} (x_i − x_k).
pub fn matrix_a_inverse(x: &[f64]) -> Result<DMatrix<f64>> {
    check_distinct(x)?;
    let n = x.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i > j {
            return 0.0;
        }
        (j + 1..n).map(|k| x[i] - x[k]).product()
    }))
}

/// max |A(x)·B(x) − I|.
pub fn matrix_a_inverse_residual(x: &[f64]) -> Result<f64> {
    let a = matrix_a(x)?;
    let b = matrix_a_inverse(x)?;
    let p = a * b;
    let n = x.len();
    let mut r = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            r = r.max((p[(i, j)] - id).abs());
        }
    }
    Ok(r)
}
