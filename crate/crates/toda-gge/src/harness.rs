//! Command implementations behind the CLI: configuration, seeding, the
//! experiments, and deterministic CSV/JSON output.
//!
//! Every command reads a JSON config (flags override it), writes its artifacts
//! into the output directory, and writes `<command>.meta.json` carrying the
//! effective config and its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::gge::{
    empirical_spectral_measure, sample, samples_from_csv, samples_to_csv, Ensemble, Potential, RootFamily,
    SamplerConfig,
};
use crate::hyperelliptic::{hat_a_matrix, integral_i, lower_bound_det_a, phi_diag_element, upper_envelope};
use crate::measures::{bl_distance, GridSpec};
use crate::quad::Rule;
use crate::rate::{
    beta_equilibrium_from, chi_measure, minimize_nu_from, rel_beta_bridge, FixedPoint, Init, RateParams,
};
use crate::spectral::{
    check_interlacing, critical_value_identities, dirichlet_spectrum, eig_periodic, fd_jacobian_det, kappeler_bound,
    matrix_a_inverse_residual, membership_an, root_map, RootMap, SpectralData,
};
use crate::textfmt::fmt_f64;
use crate::toda::{conserved_traces, flow, hamiltonian, FlaschkaState, Sign};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_TUNING: i32 = 3;
pub const EXIT_IDENTITY: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Integration { .. } => EXIT_INTEGRATION,
            Error::Tuning { .. } => EXIT_TUNING,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_FAILURE,
        };
        Failure { code, message: e.to_string() }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SimulateFlow,
    Sample,
    SpectrumHist,
    Minimize,
    LdpCheck,
    IdentitySuite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SimulateFlow => "simulate-flow",
            Command::Sample => "sample",
            Command::SpectrumHist => "spectrum-hist",
            Command::Minimize => "minimize",
            Command::LdpCheck => "ldp-check",
            Command::IdentitySuite => "identity-suite",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Raw JSON config; `None` means all defaults.
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub fuzz: Option<f64>,
}

/// Files written by a command and a one-line summary.
#[derive(Debug, Clone)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn read_config(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) })
}

fn parse<C: DeserializeOwned>(text: Option<&str>) -> Outcome<C> {
    serde_json::from_str(text.unwrap_or("{}")).map_err(|e| Error::Config(e.to_string()).into())
}

pub fn config_hash<C: Serialize>(c: &C) -> String {
    let json = serde_json::to_string(c).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Meta<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    config: &'a C,
    result: R,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Outcome<Self> {
        fs::create_dir_all(dir).map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", dir.display()) })?;
        Ok(Writer { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Outcome<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) })?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Outcome<()> {
        let mut s =
            serde_json::to_string_pretty(v).map_err(|e| Failure { code: EXIT_FAILURE, message: e.to_string() })?;
        s.push('\n');
        self.write(name, &s)
    }

    fn meta<C: Serialize, R: Serialize>(&mut self, cmd: Command, config: &C, result: R) -> Outcome<()> {
        let m = Meta {
            tool: "toda-gge",
            version: env!("CARGO_PKG_VERSION"),
            command: cmd.name(),
            config_hash: config_hash(config),
            config,
            result,
        };
        self.json(&format!("{}.meta.json", cmd.name()), &m)
    }
}

fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.iter().map(|&x| fmt_f64(x))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn run(cmd: Command, opts: &Options) -> Outcome<Report> {
    let text = opts.config.as_deref();
    match cmd {
        Command::SimulateFlow => simulate_flow(parse(text)?, opts),
        Command::Sample => cmd_sample(parse(text)?, opts),
        Command::SpectrumHist => spectrum_hist(parse(text)?, opts),
        Command::Minimize => minimize(parse(text)?, opts),
        Command::LdpCheck => ldp_check(parse(text)?, opts),
        Command::IdentitySuite => identity_suite(parse(text)?, opts),
    }
}

/// Random state on the leaf Σb = 0, Σ ln a = −Nℓ/2.
pub fn random_leaf_state(rng: &mut ChaCha8Rng, n: usize, ell: f64) -> crate::Result<FlaschkaState> {
    let mut s: Vec<f64> = (0..n).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut b: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let ms = s.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    s.iter_mut().for_each(|x| *x -= ms + ell / 2.0);
    b.iter_mut().for_each(|x| *x -= mb);
    FlaschkaState::new(s.iter().map(|x| x.exp()).collect(), b)
}

// ---------------------------------------------------------------- simulate-flow

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub n: usize,
    pub ell: f64,
    pub t: f64,
    /// Report rows at t·k/steps, k = 0..=steps.
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { n: 8, ell: 1.0, t: 5.0, steps: 10, tol: 1e-10, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub max_eigenvalue_drift: f64,
    pub max_hamiltonian_drift: f64,
    pub max_trace_drift: f64,
    pub max_leaf_drift: f64,
}

fn rel_drift(x: f64, x0: f64) -> f64 {
    (x - x0).abs() / x0.abs().max(1.0)
}

pub fn simulate_flow(mut cfg: FlowConfig, opts: &Options) -> Outcome<Report> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if cfg.n < 2 || cfg.steps == 0 {
        return Err(Error::Config("simulate-flow needs n >= 2 and steps >= 1".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = random_leaf_state(&mut rng, cfg.n, cfg.ell)?;
    let lam0 = eig_periodic(&start, Sign::Plus)?;
    let h0 = hamiltonian(&start);
    let tr0 = conserved_traces(&start, 4);
    let sa0: f64 = start.a().iter().map(|a| a.ln()).sum();
    let sb0 = start.sum_b();
    let mut rows = Vec::with_capacity(cfg.steps + 1);
    let mut summary = FlowSummary {
        max_eigenvalue_drift: 0.0,
        max_hamiltonian_drift: 0.0,
        max_trace_drift: 0.0,
        max_leaf_drift: 0.0,
    };
    let mut state = start.clone();
    let mut prev_t = 0.0;
    for k in 0..=cfg.steps {
        let t = cfg.t * k as f64 / cfg.steps as f64;
        state = flow(&state, t - prev_t, cfg.tol)?;
        prev_t = t;
        let lam = eig_periodic(&state, Sign::Plus)?;
        let eig = lam.iter().zip(&lam0).map(|(x, y)| rel_drift(*x, *y)).fold(0.0, f64::max);
        let ham = rel_drift(hamiltonian(&state), h0);
        let tr = conserved_traces(&state, 4).iter().zip(&tr0).map(|(x, y)| rel_drift(*x, *y)).fold(0.0, f64::max);
        let sa: f64 = state.a().iter().map(|a| a.ln()).sum();
        let leaf = (sa - sa0).abs().max((state.sum_b() - sb0).abs());
        summary.max_eigenvalue_drift = summary.max_eigenvalue_drift.max(eig);
        summary.max_hamiltonian_drift = summary.max_hamiltonian_drift.max(ham);
        summary.max_trace_drift = summary.max_trace_drift.max(tr);
        summary.max_leaf_drift = summary.max_leaf_drift.max(leaf);
        rows.push(vec![t, eig, ham, tr, leaf]);
    }
    let mut w = Writer::new(&opts.out)?;
    w.write(
        "flow_drift.csv",
        &csv_table(&["t", "eigenvalue_drift", "hamiltonian_drift", "trace_drift", "leaf_drift"], &rows),
    )?;
    w.meta(Command::SimulateFlow, &cfg, &summary)?;
    Ok(Report { files: w.files, summary: format!("max eigenvalue drift {:e}", summary.max_eigenvalue_drift) })
}

// ---------------------------------------------------------------- sample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub sampler: SamplerConfig,
    #[serde(default = "default_potential")]
    pub potential: Potential,
}

fn default_potential() -> Potential {
    Potential::quadratic(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub states: usize,
    pub acceptance_s: Option<f64>,
    pub acceptance_b: Option<f64>,
}

pub fn cmd_sample(mut cfg: SampleConfig, opts: &Options) -> Outcome<Report> {
    if let Some(s) = opts.seed {
        cfg.sampler.seed = s;
    }
    let batch = sample(&cfg.sampler, &cfg.potential)?;
    batch.check_tuning()?;
    let mut w = Writer::new(&opts.out)?;
    w.write("samples.csv", &samples_to_csv(&batch.states))?;
    let summary = SampleSummary {
        states: batch.states.len(),
        acceptance_s: batch.acceptance_s,
        acceptance_b: batch.acceptance_b,
    };
    w.meta(Command::Sample, &cfg, &summary)?;
    Ok(Report { files: w.files, summary: format!("{} states", summary.states) })
}

// ---------------------------------------------------------------- spectrum-hist

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistConfig {
    /// Sample CSV written by `sample`.
    pub samples: PathBuf,
    #[serde(default = "default_family")]
    pub family: RootFamily,
    pub grid: GridSpec,
}

fn default_family() -> RootFamily {
    RootFamily::LambdaPlus
}

pub fn spectrum_hist(cfg: HistConfig, opts: &Options) -> Outcome<Report> {
    let text = read_config(&cfg.samples)?;
    let states = samples_from_csv(&text)?;
    let mu = empirical_spectral_measure(&states, cfg.family, cfg.grid)?;
    let mut w = Writer::new(&opts.out)?;
    w.write("histogram.csv", &mu.to_csv())?;
    w.write("histogram.header.json", &format!("{}\n", mu.header().to_json()))?;
    w.meta(Command::SpectrumHist, &cfg, serde_json::json!({ "samples": states.len(), "mass": mu.mass() }))?;
    Ok(Report { files: w.files, summary: format!("histogram of {} states, mass {}", states.len(), fmt_f64(mu.mass())) })
}

// ---------------------------------------------------------------- minimize

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeConfig {
    pub ell: f64,
    pub potential: Potential,
    pub cells: usize,
    /// Explicit grid; defaults to the potential's symmetric grid.
    pub grid: Option<GridSpec>,
    pub fixed_point: FixedPoint,
    pub init: Init,
    /// Solve for the β-ensemble equilibrium μ_P at this P instead of ν_ℓ.
    pub beta: Option<f64>,
    /// Also run the ν_ℓ ↔ ∂_s(sμ_s) comparison.
    pub bridge: bool,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            ell: 2.0,
            potential: default_potential(),
            cells: 2048,
            grid: None,
            fixed_point: FixedPoint::default(),
            init: Init::Gaussian,
            beta: None,
            bridge: false,
        }
    }
}

fn rate_params(
    ell: f64,
    potential: &Potential,
    cells: usize,
    grid: Option<GridSpec>,
    fp: FixedPoint,
) -> crate::Result<RateParams> {
    let mut p = RateParams::new(ell, potential.clone(), cells)?;
    if let Some(g) = grid {
        p.grid = g;
    }
    p.fixed_point = fp;
    p.validate()?;
    Ok(p)
}

pub fn minimize(cfg: MinimizeConfig, opts: &Options) -> Outcome<Report> {
    let p = rate_params(cfg.ell, &cfg.potential, cfg.cells, cfg.grid, cfg.fixed_point)?;
    let sol = match cfg.beta {
        Some(pc) => beta_equilibrium_from(pc, &p, &cfg.init)?,
        None => minimize_nu_from(&p, &cfg.init)?,
    };
    let mut w = Writer::new(&opts.out)?;
    w.write("measure.csv", &sol.measure.to_csv())?;
    w.write("measure.header.json", &format!("{}\n", sol.measure.header().to_json()))?;
    w.json("trace.json", &sol.trace)?;
    let bridge = if cfg.bridge { Some(rel_beta_bridge(&p)?) } else { None };
    if let Some(b) = &bridge {
        w.json("bridge.json", b)?;
    }
    let result = serde_json::json!({
        "iterations": sol.iterations,
        "residual": sol.residual,
        "margin": if sol.margin.is_nan() { None } else { Some(sol.margin) },
        "bridge_sup_error": bridge.as_ref().map(|b| b.sup_error),
    });
    w.meta(Command::Minimize, &cfg, result)?;
    Ok(Report {
        files: w.files,
        summary: format!("converged in {} iterations, residual {:e}", sol.iterations, sol.residual),
    })
}

// ---------------------------------------------------------------- ldp-check

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdpBranch {
    /// Leaf samples against ν_ℓ.
    Constrained,
    /// θ-model samples against ∂_P(Pμ_P) at P = θ.
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpConfig {
    pub branch: LdpBranch,
    pub ell: f64,
    pub theta: f64,
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub potential: Potential,
    pub cells: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub proposal_scale: f64,
    pub seed: u64,
    /// Pass threshold on d_BL at the largest N.
    pub threshold: f64,
}

impl Default for LdpConfig {
    fn default() -> Self {
        LdpConfig {
            branch: LdpBranch::Constrained,
            ell: 1.0,
            theta: 1.0,
            n_list: vec![32, 64, 128],
            samples: 2000,
            potential: default_potential(),
            cells: 2048,
            burn_in: 1000,
            thin: 10,
            chains: 8,
            proposal_scale: 0.5,
            seed: 1,
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    pub n: usize,
    pub samples: usize,
    pub d_bl: f64,
    pub acceptance_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub branch: LdpBranch,
    pub rows: Vec<LdpRow>,
    pub strictly_decreasing: bool,
    pub final_within_threshold: bool,
}

pub fn ldp_report(cfg: &LdpConfig) -> crate::Result<(LdpReport, crate::measures::GriddedMeasure)> {
    if !cfg.potential.is_even() {
        return Err(Error::Domain("ldp-check needs an even potential".into()));
    }
    if cfg.n_list.is_empty() {
        return Err(Error::Config("n_list is empty".into()));
    }
    let (reference, ensemble) = match cfg.branch {
        LdpBranch::Constrained => {
            let p = rate_params(cfg.ell, &cfg.potential, cfg.cells, None, FixedPoint::default())?;
            (minimize_nu_from(&p, &Init::Gaussian)?.measure, Ensemble::Constrained { ell: cfg.ell })
        }
        LdpBranch::Theta => {
            let p = rate_params(1.0, &cfg.potential, cfg.cells, None, FixedPoint::default())?;
            (chi_measure(&p, cfg.theta)?, Ensemble::Unconstrained { theta: cfg.theta })
        }
    };
    let grid = reference.grid();
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for (k, &n) in cfg.n_list.iter().enumerate() {
        let sc = SamplerConfig {
            n,
            ensemble,
            n_samples: cfg.samples,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            proposal_scale: cfg.proposal_scale,
            seed: cfg.seed.wrapping_add(k as u64),
            chains: cfg.chains,
            force_mcmc: false,
        };
        let batch = sample(&sc, &cfg.potential)?;
        batch.check_tuning()?;
        let emp = empirical_spectral_measure(&batch.states, RootFamily::LambdaPlus, grid)?;
        rows.push(LdpRow {
            n,
            samples: batch.states.len(),
            d_bl: bl_distance(&emp, &reference)?,
            acceptance_s: batch.acceptance_s,
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].d_bl < w[0].d_bl);
    let final_within_threshold = rows.last().is_some_and(|r| r.d_bl <= cfg.threshold);
    Ok((LdpReport { branch: cfg.branch, rows, strictly_decreasing, final_within_threshold }, reference))
}

pub fn ldp_check(mut cfg: LdpConfig, opts: &Options) -> Outcome<Report> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let (report, reference) = ldp_report(&cfg)?;
    let mut w = Writer::new(&opts.out)?;
    w.write("reference.csv", &reference.to_csv())?;
    w.json("ldp_report.json", &report)?;
    w.meta(Command::LdpCheck, &cfg, (report.strictly_decreasing, report.final_within_threshold))?;
    let last = report.rows.last().expect("non-empty");
    Ok(Report { files: w.files, summary: format!("d_BL at N={}: {:e}", last.n, last.d_bl) })
}

// ---------------------------------------------------------------- identity-suite

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub seed: u64,
    /// Random cases per check.
    pub cases: usize,
    /// Additive perturbation of λ⁻ in the Jacobian formula (negative control).
    pub fuzz: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { seed: 1, cases: 10, fuzz: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Tally {
    name: &'static str,
    tol: f64,
    cases: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tol: f64) -> Self {
        Tally { name, tol, cases: 0, worst: 0.0 }
    }
    fn push(&mut self, r: f64) {
        self.cases += 1;
        // NaN counts as a failure
        self.worst = if r.is_nan() { f64::INFINITY } else { self.worst.max(r) };
    }
    fn finish(self) -> IdentityCheck {
        IdentityCheck {
            name: self.name.into(),
            cases: self.cases,
            max_residual: self.worst,
            tolerance: self.tol,
            passed: self.worst <= self.tol,
        }
    }
}

fn sorted_spaced(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

/// ∫_0^{Δ/2} du/√(u(u + δ)) with u = w², by Gauss–Legendre on geometrically graded panels.
fn phi_quadrature(delta: f64, big: f64) -> f64 {
    let top = (big / 2.0).sqrt();
    if top == 0.0 {
        return 0.0;
    }
    let rule = Rule::legendre(20);
    let mut edges = vec![0.0];
    let mut e = 0.25 * delta.sqrt();
    while e < top {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(top);
    edges.windows(2).flat_map(|w| rule.composite(w[0], w[1], 1)).map(|(x, wt)| wt * 2.0 / (x * x + delta).sqrt()).sum()
}

pub fn identity_checks(cfg: &IdentityConfig) -> crate::Result<Vec<IdentityCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut interlacing = Tally::new("interlacing", 1e-12);
    let mut membership = Tally::new("membership_an", 0.0);
    let mut kappeler = Tally::new("henrici_kappeler", 0.0);
    let mut row_sums = Tally::new("hat_a_row_sums", 1e-9);
    let mut lower = Tally::new("lower_bound_det_a", 1e-9);
    let mut upper = Tally::new("upper_envelope", 1e-9);
    let mut phi = Tally::new("phi_closed_form", 1e-10);
    let mut jac = Tally::new("jacobian", 1e-6);
    let mut crit_prod = Tally::new("critical_value_product", 1e-8);
    let mut crit_ineq = Tally::new("critical_value_inequalities", 1e-12);
    let mut inv_a = Tally::new("matrix_a_inverse_residual", 1e-8);
    let mut iso = Tally::new("isospectral_flow", 1e-8);

    for case in 0..cfg.cases {
        let n = 3 + case % 6;
        let ell = rng.gen_range(0.5..3.0);
        let st = random_leaf_state(&mut rng, n, ell)?;
        let sd = SpectralData::from_state(&st)?;
        let mu = dirichlet_spectrum(&st)?;
        interlacing.push(check_interlacing(&sd.lambda_plus, &sd.lambda_minus, &mu, 1e-12).worst_violation.max(0.0));
        membership.push(if membership_an(&sd.lambda_plus, sd.eps)?.is_member() { 0.0 } else { 1.0 });
        let gap = sd.lambda_plus.iter().zip(&sd.lambda_minus).map(|(p, m)| (p - m).abs()).fold(0.0, f64::max);
        kappeler.push((gap - kappeler_bound(n, ell)).max(0.0));
        let hat = hat_a_matrix(&sd)?;
        for k in 0..n - 1 {
            row_sums.push(hat.row(k).iter().sum::<f64>().abs());
        }

        let m = 2 + case % 4;
        let ell_small = rng.gen_range(1.0..2.5);
        let small = random_leaf_state(&mut rng, m, ell_small)?;
        let sds = SpectralData::from_state(&small)?;
        let ii = integral_i(&sds, 24)?;
        lower.push((lower_bound_det_a(&sds)?.log_abs - ii.log_abs).max(0.0));
        upper.push((ii.log_abs - upper_envelope(&sds)?.log_abs).max(0.0));

        let nj = 2 + case % 3;
        let eta = sorted_spaced(&mut rng, nj, -2.0, 2.0, 0.4);
        let eps = 0.01;
        let sj = SpectralData::from_eta(&eta, eps)?;
        let fd = fd_jacobian_det(&sj.lambda_minus, eps, RootMap::MinusToPlus)?;
        let lm: Vec<f64> = sj
            .lambda_minus
            .iter()
            .enumerate()
            .map(|(i, x)| x + cfg.fuzz * if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let image = root_map(&sj.lambda_minus, eps, RootMap::MinusToPlus)?;
        let formula = (crate::poly::log_vandermonde(&lm) - crate::poly::log_vandermonde(&image)).exp();
        jac.push((formula - fd).abs() / fd.abs());

        let na = 2 + case % 7;
        let eta = sorted_spaced(&mut rng, na, -4.0, 4.0, 0.05);
        let rep = critical_value_identities(&eta)?;
        crit_prod.push(rep.product_residual);
        crit_ineq.push((-rep.young_slack).max(-rep.neighbour_slack).max(0.0));
        let x = sorted_spaced(&mut rng, na, 0.0, 10.0, 0.5);
        inv_a.push(matrix_a_inverse_residual(&x)?);

        let st8 = random_leaf_state(&mut rng, 8, 1.0)?;
        let l0 = eig_periodic(&st8, Sign::Plus)?;
        let l1 = eig_periodic(&flow(&st8, 1.0, 1e-10)?, Sign::Plus)?;
        iso.push(l0.iter().zip(&l1).map(|(a, b)| rel_drift(*b, *a)).fold(0.0, f64::max));
    }
    for _ in 0..10 * cfg.cases {
        let delta: f64 = 10f64.powf(rng.gen_range(-4.0..0.0));
        let big: f64 = rng.gen_range(0.0..5.0);
        phi.push((phi_quadrature(delta, big) - phi_diag_element(delta, big)).abs());
    }
    Ok([interlacing, membership, kappeler, row_sums, lower, upper, phi, jac, crit_prod, crit_ineq, inv_a, iso]
        .into_iter()
        .map(Tally::finish)
        .collect())
}

pub fn identity_suite(mut cfg: IdentityConfig, opts: &Options) -> Outcome<Report> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(f) = opts.fuzz {
        cfg.fuzz = f;
    }
    let checks = identity_checks(&cfg)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let mut w = Writer::new(&opts.out)?;
    w.json("identity_report.json", &checks)?;
    w.meta(Command::IdentitySuite, &cfg, failed.is_empty())?;
    if !failed.is_empty() {
        return Err(Failure { code: EXIT_IDENTITY, message: format!("identity check failed: {}", failed.join(", ")) });
    }
    Ok(Report { files: w.files, summary: format!("{} identities passed", checks.len()) })
}
