//! Flaschka variables, Lax matrices and the periodic Toda flow.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase point of the N-periodic chain in Flaschka variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaschkaState {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FlaschkaState {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidState(format!("length mismatch: {} a's, {} b's", a.len(), b.len())));
        }
        if a.len() < 2 {
            return Err(Error::Size(format!("chain length {} < 2", a.len())));
        }
        if let Some(j) = a.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidState(format!("a[{j}] = {} is not positive", a[j])));
        }
        if let Some(j) = b.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidState(format!("b[{j}] is not finite")));
        }
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// ∏ a_j, evaluated through logs.
    pub fn prod_a(&self) -> f64 {
        self.a.iter().map(|x| x.ln()).sum::<f64>().exp()
    }

    pub fn sum_b(&self) -> f64 {
        self.b.iter().sum()
    }
}

/// Chain size and stretch, with ε_N = exp(−Nℓ/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub ell: f64,
    pub eps: f64,
}

impl ChainParams {
    pub fn new(n: usize, ell: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Size(format!("chain length {n} < 2")));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::Domain(format!("stretch must be positive, got {ell}")));
        }
        Ok(Self { n, ell, eps: (-(n as f64) * ell / 2.0).exp() })
    }

    pub fn ln_eps(&self) -> f64 {
        -(self.n as f64) * self.ell / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Periodic (`Plus`) or antiperiodic (`Minus`) Lax matrix.
///
/// For N = 2 the corner and the off-diagonal occupy the same slot and are summed,
/// so the (1,2) entry is a_1 ± a_2.
pub fn lax_matrix(state: &FlaschkaState, sign: Sign) -> DMatrix<f64> {
    let n = state.n();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = state.b[j];
    }
    for j in 0..n - 1 {
        m[(j, j + 1)] += state.a[j];
        m[(j + 1, j)] += state.a[j];
    }
    let corner = sign.value() * state.a[n - 1];
    m[(0, n - 1)] += corner;
    m[(n - 1, 0)] += corner;
    m
}

pub fn hamiltonian(state: &FlaschkaState) -> f64 {
    state.a.iter().zip(&state.b).map(|(a, b)| 0.5 * b * b + a * a).sum()
}

/// tr((L⁺)^j) for j = 1..=jmax, from repeated dense products.
pub fn conserved_traces(state: &FlaschkaState, jmax: usize) -> Vec<f64> {
    let l = lax_matrix(state, Sign::Plus);
    let mut p = l.clone();
    let mut out = Vec::with_capacity(jmax);
    for j in 1..=jmax {
        if j > 1 {
            p = &p * &l;
        }
        out.push(p.trace());
    }
    out
}

/// Diagonal entries (L⁺^k)_{ii} for k = 1..=kmax.
///
/// Walks are tracked on the universal cover of the ring, so the cost is
/// O(kmax²) regardless of N, and wrap-around walks are summed at the end.
pub fn diag_powers(a: &[f64], b: &[f64], i: usize, kmax: usize) -> Vec<f64> {
    let n = a.len() as i64;
    let w = 2 * kmax + 1;
    let off = kmax as i64;
    let site = |o: i64| ((i as i64 + o).rem_euclid(n)) as usize;
    let mut v = vec![0.0; w];
    let mut nv = vec![0.0; w];
    v[kmax] = 1.0;
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let reach = k as i64;
        for o in -reach..=reach {
            let idx = (o + off) as usize;
            let mut s = b[site(o)] * v[idx];
            if o > -off {
                s += a[site(o - 1)] * v[idx - 1];
            }
            if o < off {
                s += a[site(o)] * v[idx + 1];
            }
            nv[idx] = s;
        }
        std::mem::swap(&mut v, &mut nv);
        let mut d = 0.0;
        let mut m = -(reach / n) * n;
        while m <= reach {
            d += v[(m + off) as usize];
            m += n;
        }
        out.push(d);
    }
    out
}

/// Σ_k c_k (L⁺^k)_{ii} for a polynomial with coefficients `coeffs` (constant term ignored).
pub fn local_poly_trace(a: &[f64], b: &[f64], i: usize, coeffs: &[f64]) -> f64 {
    if coeffs.len() < 2 {
        return 0.0;
    }
    let d = diag_powers(a, b, i, coeffs.len() - 1);
    d.iter().zip(&coeffs[1..]).map(|(x, c)| x * c).sum()
}

/// tr V(L⁺) for polynomial V.
pub fn poly_trace(a: &[f64], b: &[f64], coeffs: &[f64]) -> f64 {
    let c0 = coeffs.first().copied().unwrap_or(0.0);
    (0..a.len()).map(|i| local_poly_trace(a, b, i, coeffs)).sum::<f64>() + c0 * a.len() as f64
}

fn rhs(s: &[f64], b: &[f64], ds: &mut [f64], db: &mut [f64]) {
    let n = s.len();
    for j in 0..n {
        let jm = (j + n - 1) % n;
        let jp = (j + 1) % n;
        db[j] = (2.0 * s[j]).exp() - (2.0 * s[jm]).exp();
        ds[j] = 0.5 * (b[jp] - b[j]);
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Integrate the Toda flow to time `t` with adaptive Dormand–Prince 5(4).
///
/// The a-variables are advanced as s = ln a. Both leaf invariants are linear in
/// (s, b), so Runge–Kutta keeps them to rounding, and positivity of a is automatic.
pub fn flow(state: &FlaschkaState, t: f64, tol: f64) -> Result<FlaschkaState> {
    if !t.is_finite() {
        return Err(Error::Domain("flow time must be finite".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let n = state.n();
    let dir = t.signum();
    let mut s: Vec<f64> = state.a.iter().map(|x| x.ln()).collect();
    let mut b = state.b.clone();
    let mut ks = vec![vec![0.0; n]; 7];
    let mut kb = vec![vec![0.0; n]; 7];
    let mut ts = vec![0.0; n];
    let mut tb = vec![0.0; n];
    let mut time = 0.0;
    let scale = 1.0 + state.b.iter().chain(&state.a).fold(0.0f64, |m, x| m.max(x.abs()));
    let mut h = dir * (0.01 / scale).min(t.abs());
    rhs(&s, &b, &mut ks[0], &mut kb[0]);
    let mut steps = 0usize;
    while (t - time) * dir > 0.0 {
        steps += 1;
        if steps > 50_000_000 {
            return Err(Error::Integration { t_reached: time, reason: "step budget exhausted".into() });
        }
        if (time + h - t) * dir > 0.0 {
            h = t - time;
        }
        if h.abs() < 1e-14 * (1.0 + time.abs()) {
            return Err(Error::Integration { t_reached: time, reason: "step size underflow".into() });
        }
        for st in 1..7 {
            for j in 0..n {
                let mut as_ = 0.0;
                let mut ab = 0.0;
                for (q, coef) in A[st].iter().enumerate().take(st) {
                    as_ += coef * ks[q][j];
                    ab += coef * kb[q][j];
                }
                ts[j] = s[j] + h * as_;
                tb[j] = b[j] + h * ab;
            }
            rhs(&ts, &tb, &mut ks[st], &mut kb[st]);
        }
        // stage 7 is evaluated at the 5th-order solution, which sits in (ts, tb)
        let mut err = 0.0f64;
        for j in 0..n {
            let mut es = 0.0;
            let mut eb = 0.0;
            for q in 0..7 {
                es += E[q] * ks[q][j];
                eb += E[q] * kb[q][j];
            }
            err =
                err.max((h * es).abs() / (tol * (1.0 + ts[j].abs()))).max((h * eb).abs() / (tol * (1.0 + tb[j].abs())));
        }
        let finite = ts.iter().chain(&tb).all(|x| x.is_finite()) && err.is_finite();
        if finite && err <= 1.0 {
            time += h;
            s.copy_from_slice(&ts);
            b.copy_from_slice(&tb);
            let (first, rest) = ks.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            let (first, rest) = kb.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else if finite {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        } else {
            h *= 0.5;
        }
    }
    let a: Vec<f64> = s.iter().map(|x| x.exp()).collect();
    FlaschkaState::new(a, b).map_err(|e| Error::Integration { t_reached: time, reason: e.to_string() })
}
