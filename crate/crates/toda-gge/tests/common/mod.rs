#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toda_gge::spectral::{upsilon, SpectralData};
use toda_gge::toda::FlaschkaState;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod 7/15 with bisection.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol.max(1e-15 * v.abs()) || depth > 60 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// Nodes and weights of an adaptive rule for a fixed integrand, for tensor products.
pub fn adaptive_nodes<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize, out: &mut Vec<(f64, f64)>) {
        let (v, e) = gk15(f, a, b);
        if e <= tol.max(1e-15 * v.abs()) || depth > 60 {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            out.push((c, WK[7] * h));
            for i in 0..7 {
                out.push((c - h * XK[i], WK[i] * h));
                out.push((c + h * XK[i], WK[i] * h));
            }
            return;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1, out);
        rec(f, m, b, 0.5 * tol, depth + 1, out);
    }
    rec(f, a, b, tol, 0, &mut out);
    out
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Coefficients (lowest first) of the monic polynomial with the given roots.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut n = vec![0.0; c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            n[i + 1] += ci;
            n[i] -= r * ci;
        }
        c = n;
    }
    c
}

pub fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ci in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + ci;
    }
    (p, dp)
}

/// Real roots of a monic polynomial from companion-matrix eigenvalues, polished by Newton.
pub fn companion_real_roots(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let mut m = DMatrix::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i];
    }
    let ev = m.complex_eigenvalues();
    let mut r: Vec<f64> = ev.iter().map(|z| z.re).collect();
    for x in r.iter_mut() {
        for _ in 0..50 {
            let (p, dp) = horner(c, *x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() < 1e-17 * x.abs().max(1.0) {
                break;
            }
        }
    }
    r.sort_by(f64::total_cmp);
    r
}

/// Random strictly increasing vector with spacing at least `gap` in [lo, hi].
pub fn random_sorted<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// d_BL between two sets of signed atoms as a linear program in (f_i, s, L).
pub fn bl_lp_oracle(atoms: &[(f64, f64)]) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut v: Vec<(f64, f64)> = atoms.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let s = p.add_var(0.0, (0.0, 1.0));
    let l = p.add_var(0.0, (0.0, 1.0));
    p.add_constraint(&[(s, 1.0), (l, 1.0)], ComparisonOp::Le, 1.0);
    let f: Vec<_> = v.iter().map(|a| p.add_var(a.1, (-1.0, 1.0))).collect();
    for &fi in &f {
        p.add_constraint(&[(fi, 1.0), (s, -1.0)], ComparisonOp::Le, 0.0);
        p.add_constraint(&[(fi, 1.0), (s, 1.0)], ComparisonOp::Ge, 0.0);
    }
    for k in 1..f.len() {
        let dx = v[k].0 - v[k - 1].0;
        p.add_constraint(&[(f[k], 1.0), (f[k - 1], -1.0), (l, -dx)], ComparisonOp::Le, 0.0);
        p.add_constraint(&[(f[k], 1.0), (f[k - 1], -1.0), (l, dx)], ComparisonOp::Ge, 0.0);
    }
    p.solve().expect("lp solves").objective()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> f64 {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> f64 {
    let mut a = x.to_vec();
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    a.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn state_spec(seed: u64, n: usize, ell: f64) -> SpectralData {
    let mut r = rng(seed);
    let mut x: Vec<f64> = (0..n).map(|_| r.gen_range(-0.5..0.5)).collect();
    let m = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= m);
    let a = x.iter().map(|v| (v - ell / 2.0).exp()).collect();
    let b = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    SpectralData::from_state(&FlaschkaState::new(a, b).unwrap()).unwrap()
}

/// θ-integrand on K_k after μ = c + h cos θ, which absorbs both endpoint roots.
pub fn cosine_weight(sd: &SpectralData, k: usize) -> (f64, f64, impl Fn(f64) -> f64 + '_) {
    let n = sd.n();
    let u = upsilon(n, k);
    let own = sd.family(u);
    let other = sd.family(-u);
    let c = 0.5 * (own[k] + own[k - 1]);
    let h = 0.5 * (own[k] - own[k - 1]);
    let g = move |t: f64| {
        let mu = c + h * t.cos();
        let mut p = 1.0;
        for i in 0..n {
            if i != k - 1 && i != k {
                p *= (mu - own[i]).abs();
            }
            p *= (mu - other[i]).abs();
        }
        1.0 / p.sqrt()
    };
    (c, h, g)
}

/// Brute-force tensor-product quadrature of the N = 3 integral in cosine variables.
pub fn tensor_oracle_three(sd: &SpectralData) -> f64 {
    let (c1, h1, g1) = cosine_weight(sd, 1);
    let (c2, h2, g2) = cosine_weight(sd, 2);
    let pi = std::f64::consts::PI;
    let n1 = adaptive_nodes(&g1, 0.0, pi, 1e-13);
    let n2 = adaptive_nodes(&g2, 0.0, pi, 1e-13);
    let mut s = 0.0;
    for &(t1, w1) in &n1 {
        let m1 = c1 + h1 * t1.cos();
        let f1 = w1 * g1(t1);
        for &(t2, w2) in &n2 {
            let m2 = c2 + h2 * t2.cos();
            s += f1 * w2 * g2(t2) * (m2 - m1);
        }
    }
    s
}
