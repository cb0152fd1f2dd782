//! Generalised Gibbs ensembles: the unconstrained θ-model with weight ∏a^{2θ−1}
//! and the constrained model on the leaf {Σb = 0, ∏a = e^{−Nℓ/2}}, plus
//! empirical spectral measures of the samples.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{GridSpec, GriddedMeasure};
use crate::spectral::{eig_periodic, roots_from_lambda_plus};
use crate::textfmt::{fmt_f64, parse_f64};
use crate::toda::{local_poly_trace, FlaschkaState, Sign};

/// Confining potential V.
///
/// Polynomials drive the samplers through tr V(L⁺); tables (linear
/// interpolation, +∞ outside the range) are accepted by the rate functional only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// Coefficients, constant term first.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Table {
        x: Vec<f64>,
        v: Vec<f64>,
    },
}

impl Potential {
    /// V(x) = αx².
    pub fn quadratic(alpha: f64) -> Self {
        Potential::Polynomial { coeffs: vec![0.0, 0.0, alpha] }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let p = Potential::Polynomial { coeffs };
        p.validate()?;
        Ok(p)
    }

    pub fn table(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let p = Potential::Table { x, v };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::Polynomial { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("polynomial coefficients must be finite".into()));
                }
                if !self.bounded_below() {
                    return Err(Error::Config(
                        "polynomial potential must have even degree and positive leading coefficient".into(),
                    ));
                }
            }
            Potential::Table { x, v } => {
                if x.len() < 2 || x.len() != v.len() {
                    return Err(Error::Config("table needs matching x and v with at least two points".into()));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(v).any(|t| !t.is_finite()) {
                    return Err(Error::Config("table x must be strictly increasing and all values finite".into()));
                }
            }
        }
        Ok(())
    }

    fn trimmed(coeffs: &[f64]) -> &[f64] {
        let mut end = coeffs.len();
        while end > 0 && coeffs[end - 1] == 0.0 {
            end -= 1;
        }
        &coeffs[..end]
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            Potential::Polynomial { coeffs } => Some(Self::trimmed(coeffs).len().saturating_sub(1)),
            Potential::Table { .. } => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Potential::Table { x: xs, v } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return f64::INFINITY;
                }
                let k = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
                let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                v[k - 1] + t * (v[k] - v[k - 1])
            }
        }
    }

    /// Even polynomial, or a table symmetric about the origin.
    pub fn is_even(&self) -> bool {
        match self {
            Potential::Polynomial { coeffs } => coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0),
            Potential::Table { x, v } => {
                let n = x.len();
                (0..n).all(|i| x[i] == -x[n - 1 - i] && v[i] == v[n - 1 - i])
            }
        }
    }

    pub fn bounded_below(&self) -> bool {
        match self {
            Potential::Polynomial { coeffs } => {
                let c = Self::trimmed(coeffs);
                c.len() >= 3 && (c.len() - 1) % 2 == 0 && c[c.len() - 1] > 0.0
            }
            Potential::Table { .. } => true,
        }
    }

    /// Continuously differentiable.
    pub fn satisfies_v1(&self) -> bool {
        matches!(self, Potential::Polynomial { .. })
    }

    /// Algebraic growth at infinity, V(x) ≥ c|x|^θ for large |x|.
    pub fn satisfies_v2(&self) -> bool {
        matches!(self, Potential::Polynomial { .. }) && self.bounded_below()
    }

    /// Growth exponent θ_V (the degree for polynomials).
    pub fn growth_exponent(&self) -> Option<f64> {
        self.degree().map(|d| d as f64)
    }

    /// α when V(x) = c + αx².
    pub fn quadratic_alpha(&self) -> Option<f64> {
        match self {
            Potential::Polynomial { coeffs } => {
                let c = Self::trimmed(coeffs);
                (c.len() == 3 && c[1] == 0.0 && c[2] > 0.0).then(|| c[2])
            }
            Potential::Table { .. } => None,
        }
    }

    /// Half-width R of a grid on which e^{−V} has negligible tail mass: the
    /// smallest R with V(±R) − V(0) ≥ 30, enlarged by 20%.
    pub fn grid_radius(&self) -> f64 {
        if let Potential::Table { x, .. } = self {
            return x[0].abs().min(x[x.len() - 1].abs());
        }
        1.2 * self.radius_for(30.0)
    }

    /// Smallest R with min(V(R), V(−R)) − V(0) ≥ rise (tables: the table range).
    pub fn radius_for(&self, rise: f64) -> f64 {
        if let Potential::Table { x, .. } = self {
            return x[0].abs().max(x[x.len() - 1].abs());
        }
        let v0 = self.eval(0.0);
        let ok = |r: f64| self.eval(r).min(self.eval(-r)) - v0 >= rise;
        let mut hi = 1.0;
        while !ok(hi) && hi < 1e8 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn coeffs(&self) -> Result<&[f64]> {
        match self {
            Potential::Polynomial { coeffs } => Ok(coeffs),
            Potential::Table { .. } => Err(Error::Config("samplers need a polynomial potential".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Ensemble {
    /// Density ∝ e^{−tr V(L⁺)} ∏ a_j^{2θ−1} da db.
    Unconstrained { theta: f64 },
    /// Restriction to Σb = 0, ∏a = e^{−Nℓ/2}.
    Constrained { ell: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n: usize,
    pub ensemble: Ensemble,
    pub n_samples: usize,
    /// Sweeps discarded (and used for step-size tuning) per chain.
    #[serde(default = "defaults::burn_in")]
    pub burn_in: usize,
    /// Sweeps between emitted samples.
    #[serde(default = "defaults::thin")]
    pub thin: usize,
    /// Initial random-walk scale for both coordinate families.
    #[serde(default = "defaults::proposal_scale")]
    pub proposal_scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// Independent chains, each on its own stream of the generator.
    #[serde(default = "defaults::chains")]
    pub chains: usize,
    /// Use Metropolis–Hastings even where exact sampling is available.
    #[serde(default)]
    pub force_mcmc: bool,
}

mod defaults {
    pub fn burn_in() -> usize {
        500
    }
    pub fn thin() -> usize {
        10
    }
    pub fn proposal_scale() -> f64 {
        0.5
    }
    pub fn chains() -> usize {
        4
    }
}

impl SamplerConfig {
    pub fn new(n: usize, ensemble: Ensemble, n_samples: usize, seed: u64) -> Self {
        SamplerConfig {
            n,
            ensemble,
            n_samples,
            burn_in: defaults::burn_in(),
            thin: defaults::thin(),
            proposal_scale: defaults::proposal_scale(),
            seed,
            chains: defaults::chains(),
            force_mcmc: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Size(format!("chain length must be >= 2, got {}", self.n)));
        }
        match self.ensemble {
            Ensemble::Unconstrained { theta } if !(theta > 0.0 && theta.is_finite()) => {
                return Err(Error::Config(format!("theta must be positive, got {theta}")))
            }
            Ensemble::Constrained { ell } if !(ell > 0.0 && ell.is_finite()) => {
                return Err(Error::Config(format!("ell must be positive, got {ell}")))
            }
            _ => {}
        }
        if self.n_samples == 0 || self.chains == 0 || self.thin == 0 {
            return Err(Error::Config("n_samples, chains and thin must be >= 1".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::Config("proposal_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub states: Vec<FlaschkaState>,
    /// Post-burn-in acceptance of the ln a moves, when those are Metropolis moves.
    pub acceptance_s: Option<f64>,
    /// Same for the b moves.
    pub acceptance_b: Option<f64>,
    /// Set when a post-burn-in acceptance rate fell outside [`ACCEPTANCE_BAND`].
    pub tuning_warning: Option<f64>,
}

impl SampleBatch {
    /// Promotes the tuning warning to an error.
    pub fn check_tuning(&self) -> Result<()> {
        match self.tuning_warning {
            Some(acceptance) => Err(Error::Tuning { acceptance }),
            None => Ok(()),
        }
    }
}

pub const TARGET_ACCEPTANCE: f64 = 0.35;
pub const ACCEPTANCE_BAND: (f64, f64) = (0.1, 0.7);

#[derive(Default, Clone, Copy)]
struct Counter {
    tried: u64,
    accepted: u64,
}

impl Counter {
    fn rate(&self) -> Option<f64> {
        (self.tried > 0).then(|| self.accepted as f64 / self.tried as f64)
    }
}

/// One Markov chain in (s = ln a, b).
struct Chain<'a> {
    coeffs: &'a [f64],
    alpha: Option<f64>,
    s: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    theta: Option<f64>,
    leaf_s: Option<f64>,
    exact_b: bool,
    rng: ChaCha8Rng,
    scale_s: f64,
    scale_b: f64,
    cs: Counter,
    cb: Counter,
    mark: Vec<bool>,
    sites: Vec<usize>,
}

impl<'a> Chain<'a> {
    fn radius(&self) -> usize {
        self.coeffs.len().saturating_sub(1) / 2
    }

    fn collect_sites(&mut self, touched: &[(usize, bool)]) {
        let n = self.a.len();
        let r = self.radius() as i64;
        self.sites.clear();
        self.mark.iter_mut().for_each(|m| *m = false);
        for &(j, is_edge) in touched {
            let lo = j as i64 - r;
            let hi = j as i64 + r + i64::from(is_edge);
            if hi - lo + 1 >= n as i64 {
                self.sites.clear();
                self.sites.extend(0..n);
                return;
            }
            for i in lo..=hi {
                let i = i.rem_euclid(n as i64) as usize;
                if !self.mark[i] {
                    self.mark[i] = true;
                    self.sites.push(i);
                }
            }
        }
    }

    fn local_energy(&self) -> f64 {
        self.sites.iter().map(|&i| local_poly_trace(&self.a, &self.b, i, self.coeffs)).sum()
    }

    fn metropolis(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.gen::<f64>() < log_ratio.exp()
    }

    fn step_s(&mut self) {
        let n = self.a.len();
        let d: f64 = self.scale_s * self.rng.sample::<f64, _>(StandardNormal);
        let j = self.rng.gen_range(0..n);
        let pair = if self.leaf_s.is_some() {
            let mut k = self.rng.gen_range(0..n - 1);
            if k >= j {
                k += 1;
            }
            Some(k)
        } else {
            None
        };
        let (sj, aj) = (self.s[j], self.a[j]);
        let old_k = pair.map(|k| (self.s[k], self.a[k]));
        let dv = if let Some(alpha) = self.alpha.filter(|_| n >= 3) {
            // tr L² = Σb² + 2Σa² for N ≥ 3
            let mut e = -2.0 * alpha * aj * aj;
            let nj = (sj + d).exp();
            e += 2.0 * alpha * nj * nj;
            if let Some(k) = pair {
                let nk = (self.s[k] - d).exp();
                e += 2.0 * alpha * (nk * nk - self.a[k] * self.a[k]);
            }
            self.s[j] = sj + d;
            self.a[j] = (sj + d).exp();
            if let Some(k) = pair {
                self.s[k] -= d;
                self.a[k] = self.s[k].exp();
            }
            e
        } else {
            let touched: Vec<(usize, bool)> = std::iter::once((j, true)).chain(pair.map(|k| (k, true))).collect();
            self.collect_sites(&touched);
            let before = self.local_energy();
            self.s[j] = sj + d;
            self.a[j] = self.s[j].exp();
            if let Some(k) = pair {
                self.s[k] -= d;
                self.a[k] = self.s[k].exp();
            }
            self.local_energy() - before
        };
        let weight = self.theta.map_or(0.0, |t| 2.0 * t * d);
        self.cs.tried += 1;
        let lr = -dv + weight;
        if lr.is_finite() && self.metropolis(lr) {
            self.cs.accepted += 1;
        } else {
            self.s[j] = sj;
            self.a[j] = aj;
            if let (Some(k), Some((sk, ak))) = (pair, old_k) {
                self.s[k] = sk;
                self.a[k] = ak;
            }
        }
    }

    fn step_b(&mut self) {
        let n = self.b.len();
        let d: f64 = self.scale_b * self.rng.sample::<f64, _>(StandardNormal);
        let j = self.rng.gen_range(0..n);
        let pair = if self.leaf_s.is_some() {
            let mut k = self.rng.gen_range(0..n - 1);
            if k >= j {
                k += 1;
            }
            Some(k)
        } else {
            None
        };
        let touched: Vec<(usize, bool)> = std::iter::once((j, false)).chain(pair.map(|k| (k, false))).collect();
        self.collect_sites(&touched);
        let bj = self.b[j];
        let bk = pair.map(|k| self.b[k]);
        let before = self.local_energy();
        self.b[j] += d;
        if let Some(k) = pair {
            self.b[k] -= d;
        }
        let dv = self.local_energy() - before;
        self.cb.tried += 1;
        if dv.is_finite() && self.metropolis(-dv) {
            self.cb.accepted += 1;
        } else {
            self.b[j] = bj;
            if let (Some(k), Some(v)) = (pair, bk) {
                self.b[k] = v;
            }
        }
    }

    fn sweep(&mut self) {
        let n = self.a.len();
        for _ in 0..n {
            self.step_s();
            if !self.exact_b {
                self.step_b();
            }
        }
    }

    fn tune(&mut self, before_s: Counter, before_b: Counter) {
        let adapt = |scale: &mut f64, now: Counter, before: Counter| {
            let tried = now.tried - before.tried;
            if tried > 0 {
                let r = (now.accepted - before.accepted) as f64 / tried as f64;
                *scale = (*scale * (2.0 * (r - TARGET_ACCEPTANCE)).exp()).clamp(1e-6, 1e3);
            }
        };
        adapt(&mut self.scale_s, self.cs, before_s);
        adapt(&mut self.scale_b, self.cb, before_b);
    }

    fn fresh_b(&mut self) {
        let alpha = self.alpha.expect("exact b needs quadratic V");
        let sd = (0.5 / alpha).sqrt();
        for v in self.b.iter_mut() {
            *v = sd * self.rng.sample::<f64, _>(StandardNormal);
        }
        if self.leaf_s.is_some() {
            let m = self.b.iter().sum::<f64>() / self.b.len() as f64;
            self.b.iter_mut().for_each(|v| *v -= m);
        }
    }

    fn emit(&mut self) -> Result<FlaschkaState> {
        if self.exact_b {
            self.fresh_b();
        }
        if let Some(target) = self.leaf_s {
            let n = self.s.len() as f64;
            let ds = (self.s.iter().sum::<f64>() - target) / n;
            for (s, a) in self.s.iter_mut().zip(self.a.iter_mut()) {
                *s -= ds;
                *a = s.exp();
            }
            if !self.exact_b {
                let m = self.b.iter().sum::<f64>() / n;
                self.b.iter_mut().for_each(|v| *v -= m);
            }
        }
        FlaschkaState::new(self.a.clone(), self.b.clone())
    }
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(chain as u64);
    r
}

fn split_counts(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|c| total / parts + usize::from(c < total % parts)).collect()
}

struct ChainOut {
    states: Vec<FlaschkaState>,
    cs: Counter,
    cb: Counter,
}

fn run_chains<F>(cfg: &SamplerConfig, f: F) -> Result<Vec<ChainOut>>
where
    F: Fn(usize, usize) -> Result<ChainOut> + Sync,
{
    let counts = split_counts(cfg.n_samples, cfg.chains);
    counts.par_iter().enumerate().map(|(c, &m)| f(c, m)).collect()
}

fn finish(outs: Vec<ChainOut>) -> Result<SampleBatch> {
    let mut states = Vec::new();
    let (mut cs, mut cb) = (Counter::default(), Counter::default());
    for o in outs {
        states.extend(o.states);
        cs.tried += o.cs.tried;
        cs.accepted += o.cs.accepted;
        cb.tried += o.cb.tried;
        cb.accepted += o.cb.accepted;
    }
    let (acceptance_s, acceptance_b) = (cs.rate(), cb.rate());
    let tuning_warning = [acceptance_s, acceptance_b]
        .into_iter()
        .flatten()
        .find(|acc| !(ACCEPTANCE_BAND.0..=ACCEPTANCE_BAND.1).contains(acc));
    Ok(SampleBatch { states, acceptance_s, acceptance_b, tuning_warning })
}

fn mcmc_chain(cfg: &SamplerConfig, v: &Potential, chain: usize, count: usize) -> Result<ChainOut> {
    let n = cfg.n;
    let coeffs = v.coeffs()?;
    let alpha = v.quadratic_alpha();
    let (theta, leaf_s, s0) = match cfg.ensemble {
        Ensemble::Unconstrained { theta } => (Some(theta), None, 0.0),
        Ensemble::Constrained { ell } => (None, Some(-(n as f64) * ell / 2.0), -ell / 2.0),
    };
    let exact_b = !cfg.force_mcmc && alpha.is_some() && n >= 3;
    let mut ch = Chain {
        coeffs,
        alpha,
        s: vec![s0; n],
        a: vec![s0.exp(); n],
        b: vec![0.0; n],
        theta,
        leaf_s,
        exact_b,
        rng: chain_rng(cfg.seed, chain),
        scale_s: cfg.proposal_scale,
        scale_b: cfg.proposal_scale,
        cs: Counter::default(),
        cb: Counter::default(),
        mark: vec![false; n],
        sites: Vec::with_capacity(n),
    };
    const TUNE_BLOCK: usize = 20;
    let mut done = 0;
    while done < cfg.burn_in {
        let (bs, bb) = (ch.cs, ch.cb);
        let block = TUNE_BLOCK.min(cfg.burn_in - done);
        for _ in 0..block {
            ch.sweep();
        }
        ch.tune(bs, bb);
        done += block;
    }
    ch.cs = Counter::default();
    ch.cb = Counter::default();
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..cfg.thin {
            ch.sweep();
        }
        states.push(ch.emit()?);
    }
    Ok(ChainOut { states, cs: ch.cs, cb: ch.cb })
}

/// Independent draws for V = αx², N ≥ 3: b ~ N(0, 1/(2α)) and a² ~ Gamma(θ, rate 2α).
fn exact_unconstrained_chain(
    cfg: &SamplerConfig,
    alpha: f64,
    theta: f64,
    chain: usize,
    count: usize,
) -> Result<ChainOut> {
    let mut rng = chain_rng(cfg.seed, chain);
    let gamma = Gamma::new(theta, 0.5 / alpha).map_err(|e| Error::Config(e.to_string()))?;
    let sd = (0.5 / alpha).sqrt();
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let a: Vec<f64> = (0..cfg.n).map(|_| gamma.sample(&mut rng).sqrt().max(f64::MIN_POSITIVE)).collect();
        let b: Vec<f64> = (0..cfg.n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        states.push(FlaschkaState::new(a, b)?);
    }
    Ok(ChainOut { states, cs: Counter::default(), cb: Counter::default() })
}

/// Samples of ∝ e^{−tr V(L⁺)} ∏a^{2θ−1} da db.
///
/// Exact for quadratic V at N ≥ 3 (the corner does not overlap the
/// off-diagonal, so tr L² separates); Metropolis–Hastings otherwise, with
/// log-target −tr V + 2θ Σ ln a in (ln a, b).
pub fn sample_unconstrained(cfg: &SamplerConfig, v: &Potential) -> Result<SampleBatch> {
    cfg.validate()?;
    v.validate()?;
    let theta = match cfg.ensemble {
        Ensemble::Unconstrained { theta } => theta,
        _ => return Err(Error::Config("expected the unconstrained ensemble".into())),
    };
    let exact = v.quadratic_alpha().filter(|_| cfg.n >= 3 && !cfg.force_mcmc);
    let outs = run_chains(cfg, |c, m| match exact {
        Some(alpha) => exact_unconstrained_chain(cfg, alpha, theta, c, m),
        None => mcmc_chain(cfg, v, c, m),
    })?;
    finish(outs)
}

/// Samples of the leaf measure. On the hyperplane Σ ln a = −Nℓ/2 the Jacobian
/// of a = e^s is the constant ∏a = ε_N, so the target in (s, b) is e^{−tr V}.
/// Moves are pair transfers s_j += d, s_k −= d (likewise for b), which keep both
/// sums fixed; for quadratic V at N ≥ 3, b is drawn exactly.
pub fn sample_constrained(cfg: &SamplerConfig, v: &Potential) -> Result<SampleBatch> {
    cfg.validate()?;
    v.validate()?;
    if !matches!(cfg.ensemble, Ensemble::Constrained { .. }) {
        return Err(Error::Config("expected the constrained ensemble".into()));
    }
    let outs = run_chains(cfg, |c, m| mcmc_chain(cfg, v, c, m))?;
    finish(outs)
}

pub fn sample(cfg: &SamplerConfig, v: &Potential) -> Result<SampleBatch> {
    match cfg.ensemble {
        Ensemble::Unconstrained { .. } => sample_unconstrained(cfg, v),
        Ensemble::Constrained { .. } => sample_constrained(cfg, v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootFamily {
    LambdaPlus,
    LambdaMinus,
    Eta,
}

pub fn family_roots(state: &FlaschkaState, which: RootFamily) -> Result<Vec<f64>> {
    match which {
        RootFamily::LambdaPlus => eig_periodic(state, Sign::Plus),
        RootFamily::LambdaMinus => eig_periodic(state, Sign::Minus),
        RootFamily::Eta => {
            let lp = eig_periodic(state, Sign::Plus)?;
            Ok(roots_from_lambda_plus(&lp, state.prod_a())?.eta)
        }
    }
}

/// Pooled normalized histogram of one root family over all samples.
pub fn empirical_spectral_measure(
    samples: &[FlaschkaState],
    which: RootFamily,
    grid: GridSpec,
) -> Result<GriddedMeasure> {
    if samples.is_empty() {
        return Err(Error::Size("need at least one sample".into()));
    }
    let roots: Vec<Vec<f64>> = samples.par_iter().map(|s| family_roots(s, which)).collect::<Result<_>>()?;
    let (lo, hi) = roots.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if lo < grid.lo || hi >= grid.hi {
        return Err(Error::WidenGrid { lo: lo.min(grid.lo), hi: hi.max(grid.hi) });
    }
    let total: usize = roots.iter().map(Vec::len).sum();
    let w = 1.0 / total as f64;
    let h = grid.h();
    let mut masses = vec![0.0; grid.cells];
    for &x in roots.iter().flatten() {
        let k = (((x - grid.lo) / h).floor() as usize).min(grid.cells - 1);
        masses[k] += w;
    }
    GriddedMeasure::from_masses(grid, &masses)
}

/// Z_1 = ∫∫ e^{−αb² − 2αa²} a^{2θ−1} da db for V = αx², the per-site factor of
/// the unconstrained partition function in this crate's convention.
///
/// Both factors are trapezoid sums (in b, and in t = ln a), which converge
/// geometrically for these analytic, doubly decaying integrands.
pub fn partition_scalar(theta: f64, v: &Potential) -> Result<f64> {
    let alpha = v.quadratic_alpha().ok_or_else(|| Error::Domain("partition_scalar needs V = αx²".into()))?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta must be positive, got {theta}")));
    }
    let trap = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, step: f64| -> f64 {
        let n = ((hi - lo) / step).ceil() as usize;
        let h = (hi - lo) / n as f64;
        (0..=n).map(|i| f(lo + i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * h
    };
    let rb = (80.0 / alpha).sqrt();
    let zb = trap(&|b: f64| (-alpha * b * b).exp(), -rb, rb, 0.05 / alpha.sqrt());
    let t_lo = -40.0 / theta;
    let t_hi = 0.5 * (40.0 / alpha).ln() + 1.0;
    let za = trap(&|t: f64| (2.0 * theta * t - 2.0 * alpha * (2.0 * t).exp()).exp(), t_lo, t_hi, 0.02);
    Ok(zb * za)
}

/// One row per state: n, a_1..a_n, b_1..b_n, under a header naming the widest row.
pub fn samples_to_csv(samples: &[FlaschkaState]) -> String {
    let width = samples.iter().map(|s| s.n()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut head = vec!["n".to_string()];
    head.extend((1..=width).map(|i| format!("a_{i}")));
    head.extend((1..=width).map(|i| format!("b_{i}")));
    w.write_record(&head).expect("in-memory write");
    for s in samples {
        let mut row = vec![s.n().to_string()];
        row.extend(s.a().iter().map(|&x| fmt_f64(x)));
        row.extend(s.b().iter().map(|&x| fmt_f64(x)));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn samples_from_csv(text: &str) -> Result<Vec<FlaschkaState>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let first = rec.get(0).unwrap_or("").trim();
        if line == 0 && first == "n" {
            continue;
        }
        let n: usize =
            first.parse().map_err(|_| Error::Parse(format!("row {}: bad chain length {first:?}", line + 1)))?;
        if n == 0 || rec.len() != 1 + 2 * n {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, found {}",
                line + 1,
                1 + 2 * n.max(1),
                rec.len()
            )));
        }
        let vals: Vec<f64> = (1..rec.len())
            .map(|i| {
                parse_f64(&rec[i])
                    .ok_or_else(|| Error::Parse(format!("row {}, field {}: not a number", line + 1, i + 1)))
            })
            .collect::<Result<_>>()?;
        let st = FlaschkaState::new(vals[..n].to_vec(), vals[n..].to_vec())
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        out.push(st);
    }
    Ok(out)
}
