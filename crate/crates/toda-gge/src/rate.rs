//! The rate functional I[μ], the constraint set 𝒞, and damped fixed-point
//! solvers for its minimiser ν_ℓ and for the β-ensemble equilibrium μ_P.
//!
//! Everything is discretised on one uniform grid with piecewise-constant
//! densities. With U_i the exact log-potential at cell centre i and V_i = V(c_i),
//!
//!   I_h[ρ] = Σ_i h ρ_i (V_i − ln(1 + cU_i) + ln ρ_i),   c = 2/ℓ,
//!
//! and the solvers iterate the stationarity conditions of exactly this sum, so
//! their fixed points are the discrete minimisers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gge::Potential;
use crate::measures::{GridSpec, GriddedMeasure, LogKernel};
use crate::quad::Rule;

/// Cells where 1 + cU falls at or below this count as outside 𝒞.
pub const TOL_NEG: f64 = 1e-14;
/// μ-mass outside 𝒞 (or where V = ∞) above which I = +∞.
pub const INFINITE_MASS: f64 = 1e-10;
/// Density threshold defining the bulk on which residuals are measured.
pub const BULK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub max_iter: usize,
    /// Log-space damping α ∈ (0, 1].
    pub damping: f64,
    /// Sup-norm bulk residual of the Euler–Lagrange equation.
    pub tol: f64,
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint { max_iter: 20_000, damping: 0.3, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub ell: f64,
    pub potential: Potential,
    pub grid: GridSpec,
    #[serde(default)]
    pub fixed_point: FixedPoint,
}

impl RateParams {
    /// Grid [−R, R] with R from [`Potential::grid_radius`].
    pub fn new(ell: f64, potential: Potential, cells: usize) -> Result<Self> {
        let grid = GridSpec::symmetric(potential.grid_radius(), cells)?;
        let p = RateParams { ell, potential, grid, fixed_point: FixedPoint::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            return Err(Error::Config(format!("ell must be positive, got {}", self.ell)));
        }
        let fp = &self.fixed_point;
        if !(fp.tol > 0.0) || !(fp.damping > 0.0 && fp.damping <= 1.0) || fp.max_iter == 0 {
            return Err(Error::Config("fixed point needs tol > 0, damping in (0, 1] and max_iter >= 1".into()));
        }
        self.potential.validate()
    }

    fn coupling(&self) -> f64 {
        2.0 / self.ell
    }
}

fn v_at_centers(v: &Potential, mu: &GriddedMeasure) -> Vec<f64> {
    (0..mu.n()).map(|i| v.eval(mu.center(i))).collect()
}

/// I[μ] for a normalized gridded μ, +∞ when μ leaves 𝒞 or ∫V dμ diverges.
pub fn rate_i(mu: &GriddedMeasure, v: &Potential, ell: f64) -> Result<f64> {
    if (mu.mass() - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!("rate functional needs a probability measure (mass {})", mu.mass())));
    }
    if !(ell > 0.0) {
        return Err(Error::Domain(format!("ell must be positive, got {ell}")));
    }
    let c = 2.0 / ell;
    let h = mu.h();
    let u = LogKernel::for_measure(mu).apply(mu.density());
    let vc = v_at_centers(v, mu);
    let mut bad = 0.0;
    let mut total = 0.0;
    for (i, &r) in mu.density().iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let t = 1.0 + c * u[i];
        if t <= TOL_NEG || !vc[i].is_finite() {
            bad += h * r;
            continue;
        }
        total += h * r * (vc[i] - t.ln() + r.ln());
    }
    Ok(if bad > INFINITE_MASS { f64::INFINITY } else { total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub inside: bool,
    /// min of 1 + (2/ℓ)U[μ] over the cells carrying mass.
    pub margin: f64,
}

pub fn in_constraint_set(mu: &GriddedMeasure, ell: f64) -> ConstraintCheck {
    let c = 2.0 / ell;
    let u = LogKernel::for_measure(mu).apply(mu.density());
    let margin = mu
        .density()
        .iter()
        .zip(&u)
        .filter(|(&r, _)| r > 0.0)
        .map(|(_, &ui)| 1.0 + c * ui)
        .fold(f64::INFINITY, f64::min);
    ConstraintCheck { inside: margin >= 0.0, margin }
}

/// Starting density for the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// e^{−V}/Z.
    Gaussian,
    /// Uniform over the whole grid.
    Uniform,
    /// A measure on the solver grid (warm start).
    Measure(GriddedMeasure),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    /// Discrete functional value at this iterate (I for ν_ℓ, J^C_P for μ_P).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub measure: GriddedMeasure,
    pub iterations: usize,
    pub residual: f64,
    /// 1 + (2/ℓ)U margin for ν_ℓ; NaN for β-equilibria.
    pub margin: f64,
    pub trace: Vec<TraceRow>,
}

/// Shared solver state on one grid.
struct Problem<'a> {
    p: &'a RateParams,
    h: f64,
    centers: Vec<f64>,
    v: Vec<f64>,
    kernel: LogKernel,
}

impl<'a> Problem<'a> {
    fn new(p: &'a RateParams) -> Result<Self> {
        p.validate()?;
        let h = p.grid.h();
        let centers: Vec<f64> = (0..p.grid.cells).map(|i| p.grid.lo + (i as f64 + 0.5) * h).collect();
        let v: Vec<f64> = centers.iter().map(|&x| p.potential.eval(x)).collect();
        if v.iter().all(|x| !x.is_finite()) {
            return Err(Error::Domain("potential is infinite on the whole grid".into()));
        }
        Ok(Problem { p, h, kernel: LogKernel::new(h, p.grid.cells), centers, v })
    }

    /// ln of a normalized density; −∞ where V is infinite.
    fn normalize_log(&self, logr: &mut [f64]) {
        let m = logr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logr.iter().map(|&l| (l - m).exp()).sum::<f64>() * self.h;
        let shift = m + z.ln();
        logr.iter_mut().for_each(|l| *l -= shift);
    }

    fn init_log(&self, init: &Init) -> Result<Vec<f64>> {
        let vmin = self.v.iter().copied().fold(f64::INFINITY, f64::min);
        let mut logr: Vec<f64> = match init {
            Init::Gaussian => self.v.iter().map(|&x| vmin - x).collect(),
            Init::Uniform => self.v.iter().map(|&x| if x.is_finite() { 0.0 } else { f64::NEG_INFINITY }).collect(),
            Init::Measure(m) => {
                if !m.same_grid(&GriddedMeasure::zeros(self.p.grid)) {
                    return Err(Error::Config("warm start must live on the solver grid".into()));
                }
                m.density()
                    .iter()
                    .zip(&self.v)
                    .map(|(&d, &x)| if d > 0.0 && x.is_finite() { d.ln() } else { f64::NEG_INFINITY })
                    .collect()
            }
        };
        if logr.iter().all(|l| *l == f64::NEG_INFINITY) {
            return Err(Error::Domain("initial density vanishes on the grid".into()));
        }
        self.normalize_log(&mut logr);
        Ok(logr)
    }

    fn density(&self, logr: &[f64]) -> Vec<f64> {
        logr.iter().map(|&l| l.exp()).collect()
    }

    fn bulk_residual(&self, rho: &[f64], veff: &[f64]) -> f64 {
        let c: f64 = rho.iter().zip(veff).filter(|(&r, _)| r > 0.0).map(|(&r, &e)| r * e).sum::<f64>() * self.h;
        rho.iter().zip(veff).filter(|(&r, _)| r > BULK).map(|(_, &e)| (e - c).abs()).fold(0.0, f64::max)
    }

    fn measure(&self, logr: &[f64]) -> Result<GriddedMeasure> {
        GriddedMeasure::new(self.p.grid.lo, self.h, self.density(logr))?.normalized()
    }

    /// Margin of 1 + cU over the bulk.
    fn bulk_margin(&self, rho: &[f64], u: &[f64]) -> f64 {
        let c = self.p.coupling();
        rho.iter().zip(u).filter(|(&r, _)| r > BULK).map(|(_, &x)| 1.0 + c * x).fold(f64::INFINITY, f64::min)
    }

    /// Widens an initial density by x ↦ 1.25x until it sits inside 𝒞 with room to spare.
    fn dilate_into_constraint(&self, mut logr: Vec<f64>) -> Result<Vec<f64>> {
        let lo = self.p.grid.lo;
        for _ in 0..40 {
            let rho = self.density(&logr);
            let u = self.kernel.apply(&rho);
            if self.bulk_margin(&rho, &u) > 0.05 {
                return Ok(logr);
            }
            let k = 1.25;
            let mut next: Vec<f64> = self
                .centers
                .iter()
                .zip(&self.v)
                .map(|(&x, &vx)| {
                    if !vx.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    // linear interpolation of ln ρ at x/k
                    let t = ((x / k - lo) / self.h - 0.5).clamp(0.0, (logr.len() - 1) as f64);
                    let i = (t.floor() as usize).min(logr.len() - 2);
                    let f = t - i as f64;
                    let (a, b) = (logr[i], logr[i + 1]);
                    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                        if f < 0.5 {
                            a
                        } else {
                            b
                        }
                    } else {
                        a + f * (b - a)
                    }
                })
                .collect();
            self.normalize_log(&mut next);
            logr = next;
        }
        Err(Error::Domain("could not find an initial density inside the constraint set".into()))
    }

    fn rate_value(&self, rho: &[f64], u: &[f64]) -> f64 {
        let c = self.p.coupling();
        rho.iter()
            .zip(u)
            .zip(&self.v)
            .filter(|((&r, _), _)| r > 0.0)
            .map(|((&r, &ui), &vi)| r * (vi - (1.0 + c * ui).max(TOL_NEG).ln() + r.ln()))
            .sum::<f64>()
            * self.h
    }

    /// Damped iteration ln ρ ← (1 − α) ln ρ + α ln ρ̃ with ρ̃ = target(ρ, U).
    ///
    /// `target` returns (ln ρ̃ up to a constant, functional value); `admissible`
    /// rejects candidates, which halves α.
    fn iterate<T, A>(
        &self,
        mut logr: Vec<f64>,
        target: T,
        admissible: A,
    ) -> Result<(Vec<f64>, usize, f64, Vec<TraceRow>)>
    where
        T: Fn(&[f64], &[f64]) -> (Vec<f64>, f64),
        A: Fn(&[f64], &[f64]) -> bool,
    {
        let fp = self.p.fixed_point;
        let mut alpha = fp.damping;
        let mut rho = self.density(&logr);
        let mut u = self.kernel.apply(&rho);
        let mut trace = Vec::new();
        let mut last = f64::INFINITY;
        for it in 0..fp.max_iter {
            let (lt, value) = target(&rho, &u);
            let veff: Vec<f64> = logr.iter().zip(&lt).map(|(&l, &t)| if l.is_finite() { l - t } else { 0.0 }).collect();
            let residual = self.bulk_residual(&rho, &veff);
            trace.push(TraceRow { iteration: it, residual, value });
            last = residual;
            if residual <= fp.tol {
                return Ok((logr, it, residual, trace));
            }
            loop {
                let mut cand: Vec<f64> = logr
                    .iter()
                    .zip(&lt)
                    .map(|(&l, &t)| if l.is_finite() { (1.0 - alpha) * l + alpha * t } else { l })
                    .collect();
                self.normalize_log(&mut cand);
                let crho = self.density(&cand);
                let cu = self.kernel.apply(&crho);
                if admissible(&crho, &cu) && cand.iter().all(|l| !l.is_nan()) {
                    logr = cand;
                    rho = crho;
                    u = cu;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-4 {
                    return Err(Error::NonConvergence {
                        iterations: it,
                        last_residual: residual,
                        trace: trace.iter().map(|r| r.residual).collect(),
                    });
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: fp.max_iter,
            last_residual: last,
            trace: trace.iter().map(|r| r.residual).collect(),
        })
    }
}

/// ν_ℓ, the minimiser of I, by the damped Euler–Lagrange iteration
///
///   ln ρ̃ = −V + ln(1 + cU) + c ∫ ln|x − y| ρ(y)/(1 + cU(y)) dy.
///
/// An initial density violating 𝒞 is first dilated until it satisfies it.
pub fn minimize_nu_from(p: &RateParams, init: &Init) -> Result<Solution> {
    let pr = Problem::new(p)?;
    let c = p.coupling();
    let logr = pr.dilate_into_constraint(pr.init_log(init)?)?;
    let target = |rho: &[f64], u: &[f64]| {
        let t: Vec<f64> = u.iter().map(|&x| (1.0 + c * x).max(TOL_NEG)).collect();
        let w: Vec<f64> = rho.iter().zip(&t).map(|(&r, &ti)| r / ti).collect();
        let kw = pr.kernel.apply(&w);
        let lt = pr.v.iter().zip(&t).zip(&kw).map(|((&vi, &ti), &k)| -vi + ti.ln() + c * k).collect();
        (lt, pr.rate_value(rho, u))
    };
    let admissible = |rho: &[f64], u: &[f64]| pr.bulk_margin(rho, u) > 0.0;
    let (logr, iterations, residual, trace) = pr.iterate(logr, target, admissible)?;
    let measure = pr.measure(&logr)?;
    let check = in_constraint_set(&measure, p.ell);
    if !(check.margin > 0.0) {
        return Err(Error::Domain(format!("solver output left the constraint set (margin {:e})", check.margin)));
    }
    Ok(Solution { measure, iterations, residual, margin: check.margin, trace })
}

pub fn minimize_nu(p: &RateParams) -> Result<Solution> {
    minimize_nu_from(p, &Init::Gaussian)
}

/// μ_P, the minimiser of ∫V dμ − P∬ ln|x − y| dμdμ − Ent[μ], by damped
/// iteration of ρ ∝ exp(−V + 2P U[ρ]).
pub fn beta_equilibrium_from(pcoef: f64, p: &RateParams, init: &Init) -> Result<Solution> {
    if !(pcoef > 0.0 && pcoef.is_finite()) {
        return Err(Error::Domain(format!("P must be positive, got {pcoef}")));
    }
    let pr = Problem::new(p)?;
    let logr = pr.init_log(init)?;
    let target = |rho: &[f64], u: &[f64]| {
        let lt = pr.v.iter().zip(u).map(|(&vi, &ui)| -vi + 2.0 * pcoef * ui).collect();
        let value = rho
            .iter()
            .zip(u)
            .zip(&pr.v)
            .filter(|((&r, _), _)| r > 0.0)
            .map(|((&r, &ui), &vi)| r * (vi - pcoef * ui + r.ln()))
            .sum::<f64>()
            * pr.h;
        (lt, value)
    };
    let (logr, iterations, residual, trace) = pr.iterate(logr, target, |_, _| true)?;
    Ok(Solution { measure: pr.measure(&logr)?, iterations, residual, margin: f64::NAN, trace })
}

pub fn beta_equilibrium(pcoef: f64, p: &RateParams) -> Result<Solution> {
    beta_equilibrium_from(pcoef, p, &Init::Gaussian)
}

/// 𝗆(ℓ) = ∫ dν/(1 + (2/ℓ)U[ν]).
pub fn m_of(nu: &GriddedMeasure, ell: f64) -> f64 {
    let c = 2.0 / ell;
    let u = LogKernel::for_measure(nu).apply(nu.density());
    nu.density().iter().zip(&u).map(|(&r, &x)| r / (1.0 + c * x)).sum::<f64>() * nu.h()
}

/// Bounded-Lipschitz probes, each with ‖f‖_∞ + Lip(f) ≤ 1.
pub fn test_battery() -> Vec<(&'static str, fn(f64) -> f64)> {
    vec![
        ("tanh", |x| 0.5 * x.tanh()),
        ("tanh_shift_right", |x| 0.5 * (x - 1.0).tanh()),
        ("tanh_shift_left", |x| 0.5 * (x + 1.0).tanh()),
        ("cos", |x| 0.5 * x.cos()),
        ("sin", |x| 0.5 * x.sin()),
        ("cos2", |x| (2.0 * x).cos() / 3.0),
        ("sin2", |x| (2.0 * x).sin() / 3.0),
        ("lorentzian", |x| 0.6 / (1.0 + x * x)),
        ("abs_capped", |x| 0.5 * x.abs().min(1.0)),
        ("gaussian", |x| 0.5 * (-x * x).exp()),
        ("clamp", |x| 0.5 * x.clamp(-1.0, 1.0)),
        ("hat", |x| 0.5 * (1.0 - (x - 0.5).abs()).max(0.0)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub ell: f64,
    pub m: f64,
    pub s_star: f64,
    pub fd_step: f64,
    /// ∫f dν_ℓ for the battery.
    pub nu_integrals: Vec<f64>,
    /// ∂_s(s∫f dμ_s) at s*.
    pub chi_integrals: Vec<f64>,
    pub sup_error: f64,
    /// Same comparison with χ taken at 2s* instead.
    pub control_sup_error: f64,
    pub nu_residual: f64,
}

fn chi_integrals(p: &RateParams, s: f64, fs: &[(&str, fn(f64) -> f64)]) -> Result<(f64, Vec<f64>)> {
    let step = 1e-3 * s;
    if !(step > 0.0) || s - step == s || s + step == s {
        return Err(Error::Numeric(format!("finite-difference step underflows at s = {s:e}")));
    }
    let mut fp = p.clone();
    fp.fixed_point.tol = p.fixed_point.tol.min(1e-11);
    let mid = beta_equilibrium(s, &fp)?;
    let warm = Init::Measure(mid.measure);
    let plus = beta_equilibrium_from(s + step, &fp, &warm)?.measure;
    let minus = beta_equilibrium_from(s - step, &fp, &warm)?.measure;
    let vals = fs
        .iter()
        .map(|(_, f)| ((s + step) * plus.integrate(f) - (s - step) * minus.integrate(f)) / (2.0 * step))
        .collect();
    Ok((step, vals))
}

/// χ_s = ∂_s(s μ_s) as a density, by central differences with step 1e−3·s.
/// Rounding-level negative values in the far tails are clipped before renormalizing.
pub fn chi_measure(p: &RateParams, s: f64) -> Result<GriddedMeasure> {
    let step = 1e-3 * s;
    if !(step > 0.0) || s - step == s || s + step == s {
        return Err(Error::Numeric(format!("finite-difference step underflows at s = {s:e}")));
    }
    let mut fp = p.clone();
    fp.fixed_point.tol = p.fixed_point.tol.min(1e-11);
    let warm = Init::Measure(beta_equilibrium(s, &fp)?.measure);
    let plus = beta_equilibrium_from(s + step, &fp, &warm)?.measure;
    let minus = beta_equilibrium_from(s - step, &fp, &warm)?.measure;
    let d = plus
        .density()
        .iter()
        .zip(minus.density())
        .map(|(a, b)| (((s + step) * a - (s - step) * b) / (2.0 * step)).max(0.0))
        .collect();
    GriddedMeasure::new(plus.x0(), plus.h(), d)?.normalized()
}

/// Compares ν_ℓ with χ = ∂_s(s μ_s) at s* = 𝗆(ℓ)/ℓ on [`test_battery`], and
/// repeats the comparison at 2s* as a negative control.
pub fn rel_beta_bridge(p: &RateParams) -> Result<BridgeReport> {
    if !p.potential.is_even() {
        return Err(Error::Domain("the bridge is implemented for even potentials".into()));
    }
    let mut tight = p.clone();
    tight.fixed_point.tol = p.fixed_point.tol.min(1e-11);
    let nu = minimize_nu(&tight)?;
    let m = m_of(&nu.measure, p.ell);
    let s_star = m / p.ell;
    let fs = test_battery();
    let nu_integrals: Vec<f64> = fs.iter().map(|(_, f)| nu.measure.integrate(f)).collect();
    let (fd_step, chi) = chi_integrals(p, s_star, &fs)?;
    let (_, control) = chi_integrals(p, 2.0 * s_star, &fs)?;
    let sup = |x: &[f64]| x.iter().zip(&nu_integrals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(BridgeReport {
        ell: p.ell,
        m,
        s_star,
        fd_step,
        sup_error: sup(&chi),
        control_sup_error: sup(&control),
        nu_integrals,
        chi_integrals: chi,
        nu_residual: nu.residual,
    })
}

/// A constant C with I[μ] ≥ ¼∫V dμ − C for every probability measure μ:
///
///   C = ln ∫ e^{−V/4} − inf_x [V(x)/2 − (4/ℓ) ln(1 + |x|)].
///
/// It follows from the Gibbs inequality with reference e^{−V/4} and from
/// ln|x − y| ≤ ln(1 + |x|) + ln(1 + |y|).
pub fn lower_bound_constant(v: &Potential, ell: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::Domain(format!("ell must be positive, got {ell}")));
    }
    v.validate()?;
    let (lo, hi) = match v {
        Potential::Table { x, .. } => (x[0], x[x.len() - 1]),
        Potential::Polynomial { .. } => {
            let r = v.radius_for(400.0);
            (-r, r)
        }
    };
    let scan = 20_001;
    let step = (hi - lo) / (scan - 1) as f64;
    let g = |x: f64| v.eval(x) / 2.0 - 4.0 / ell * (1.0 + x.abs()).ln();
    let (mut best_x, mut best) = (lo, g(lo));
    for i in 1..scan {
        let x = lo + i as f64 * step;
        let y = g(x);
        if y < best {
            best = y;
            best_x = x;
        }
    }
    // golden refinement inside the bracketing scan cells
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) < g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let inf = best.min(g(0.5 * (a + b))).min(g(0.0));
    let shift = (0..scan).map(|i| v.eval(lo + i as f64 * step)).fold(f64::INFINITY, f64::min);
    let rule = Rule::legendre(16);
    let z: f64 = rule.composite(lo, hi, 2000).iter().map(|&(x, w)| w * (-(v.eval(x) - shift) / 4.0).exp()).sum();
    Ok(z.ln() - shift / 4.0 - inf)
}
