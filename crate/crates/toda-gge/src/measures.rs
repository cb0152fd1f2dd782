//! Piecewise-constant probability measures on uniform grids, with cell-exact
//! logarithmic potentials, the bounded-Lipschitz distance, and the
//! dilation / truncation / mollification pipeline.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Rule;
use crate::textfmt::{fmt_f64, parse_f64};

/// Uniform grid of `cells` cells on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || cells == 0 {
            return Err(Error::Domain(format!("bad grid [{lo}, {hi}] with {cells} cells")));
        }
        Ok(GridSpec { lo, hi, cells })
    }

    pub fn symmetric(r: f64, cells: usize) -> Result<Self> {
        Self::new(-r, r, cells)
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedMeasure {
    x0: f64,
    h: f64,
    density: Vec<f64>,
    mass: f64,
}

/// Grid geometry as stored next to a measure CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureHeader {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl MeasureHeader {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("header serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let h: MeasureHeader = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if !(h.x0.is_finite() && h.h.is_finite() && h.h > 0.0) || h.n == 0 {
            return Err(Error::Parse("header needs finite x0, h > 0 and n >= 1".into()));
        }
        Ok(h)
    }
}

impl GriddedMeasure {
    pub fn new(x0: f64, h: f64, density: Vec<f64>) -> Result<Self> {
        if !(x0.is_finite() && h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!("grid needs finite x0 and h > 0, got x0={x0}, h={h}")));
        }
        if density.is_empty() {
            return Err(Error::Domain("empty density".into()));
        }
        if let Some(i) = density.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Domain(format!("density[{i}] = {} is not a finite non-negative number", density[i])));
        }
        let mass = density.iter().sum::<f64>() * h;
        if !mass.is_finite() {
            return Err(Error::Domain("mass overflows".into()));
        }
        Ok(GriddedMeasure { x0, h, density, mass })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        GriddedMeasure { x0: grid.lo, h: grid.h(), density: vec![0.0; grid.cells], mass: 0.0 }
    }

    /// Density f evaluated at cell centres (clamped at 0), not normalized.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: GridSpec, f: F) -> Result<Self> {
        let h = grid.h();
        let d = (0..grid.cells).map(|i| f(grid.lo + (i as f64 + 0.5) * h).max(0.0)).collect();
        Self::new(grid.lo, h, d)
    }

    /// Uniform probability measure on [lo, hi].
    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        let g = GridSpec::new(lo, hi, cells)?;
        Self::new(lo, g.h(), vec![1.0 / (hi - lo); cells])
    }

    /// Cell masses placed on a grid, density = mass/h.
    pub fn from_masses(grid: GridSpec, masses: &[f64]) -> Result<Self> {
        if masses.len() != grid.cells {
            return Err(Error::Size(format!("{} masses for {} cells", masses.len(), grid.cells)));
        }
        let h = grid.h();
        Self::new(grid.lo, h, masses.iter().map(|m| m / h).collect())
    }

    pub fn normalized(&self) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::Domain("cannot normalize a measure of zero mass".into()));
        }
        let d = self.density.iter().map(|x| x / self.mass).collect();
        Self::new(self.x0, self.h, d)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn n(&self) -> usize {
        self.density.len()
    }
    pub fn density(&self) -> &[f64] {
        &self.density
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn x_end(&self) -> f64 {
        self.x0 + self.h * self.n() as f64
    }
    pub fn center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h
    }
    pub fn edge(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }
    pub fn centers(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.center(i)).collect()
    }
    pub fn grid(&self) -> GridSpec {
        GridSpec { lo: self.x0, hi: self.x_end(), cells: self.n() }
    }
    pub fn header(&self) -> MeasureHeader {
        MeasureHeader { x0: self.x0, h: self.h, n: self.n() }
    }

    pub fn same_grid(&self, o: &GriddedMeasure) -> bool {
        self.n() == o.n() && self.x0 == o.x0 && self.h == o.h
    }

    /// a·self + b·other on a shared grid.
    pub fn combine(&self, a: f64, other: &GriddedMeasure, b: f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::Domain("measures live on different grids".into()));
        }
        let d = self.density.iter().zip(&other.density).map(|(x, y)| a * x + b * y).collect();
        Self::new(self.x0, self.h, d)
    }

    pub fn mean(&self) -> f64 {
        self.density.iter().enumerate().map(|(i, d)| d * self.center(i)).sum::<f64>() * self.h / self.mass
    }

    /// ∫x² dμ, exact for the piecewise-constant density.
    pub fn second_moment(&self) -> f64 {
        let h2 = self.h * self.h / 12.0;
        self.density.iter().enumerate().map(|(i, d)| d * (self.center(i).powi(2) + h2)).sum::<f64>() * self.h
    }

    /// ∫f dμ with three Gauss points per cell (exact for quintics).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let rule = Rule::legendre(3);
        let mut s = 0.0;
        for (i, &d) in self.density.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let c = self.center(i);
            let cell: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(c + 0.5 * self.h * x)).sum();
            s += d * 0.5 * self.h * cell;
        }
        s
    }

    /// μ((−∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        self.mass_between(f64::NEG_INFINITY, x)
    }

    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let mut s = 0.0;
        for (i, &d) in self.density.iter().enumerate() {
            let a = self.edge(i).max(lo);
            let b = self.edge(i + 1).min(hi);
            if b > a {
                s += d * (b - a);
            }
        }
        s
    }

    /// ∫_{lo}^{hi} |x| dμ.
    pub fn abs_moment_between(&self, lo: f64, hi: f64) -> f64 {
        let mut s = 0.0;
        for (i, &d) in self.density.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let a = self.edge(i).max(lo);
            let b = self.edge(i + 1).min(hi);
            if b > a {
                s += d * abs_integral(a, b);
            }
        }
        s
    }

    /// Smallest and largest edges of cells carrying mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.density.iter().position(|&d| d > 0.0)?;
        let last = self.density.iter().rposition(|&d| d > 0.0)?;
        Some((self.edge(first), self.edge(last + 1)))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "density"]).expect("in-memory write");
        for (i, &d) in self.density.iter().enumerate() {
            w.write_record([fmt_f64(self.center(i)), fmt_f64(d)]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Parses `x,density` rows; the x column must be equally spaced cell centres.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (xs, ds) = read_two_columns(text)?;
        if xs.len() < 2 {
            return Err(Error::Parse("need at least two rows to infer the grid".into()));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parse("x column must be increasing".into()));
        }
        for (i, &x) in xs.iter().enumerate() {
            let expect = xs[0] + i as f64 * h;
            if (x - expect).abs() > 1e-9 * h.max(x.abs()) {
                return Err(Error::Parse(format!("row {} is off the uniform grid", i + 1)));
            }
        }
        Self::new(xs[0] - 0.5 * h, h, ds).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses the CSV and checks it against a JSON grid header.
    pub fn from_csv_with_header(text: &str, header_json: &str) -> Result<Self> {
        let hd = MeasureHeader::from_json(header_json)?;
        let (xs, ds) = read_two_columns(text)?;
        if xs.len() != hd.n {
            return Err(Error::Parse(format!("header says {} rows, found {}", hd.n, xs.len())));
        }
        for (i, &x) in xs.iter().enumerate() {
            let c = hd.x0 + (i as f64 + 0.5) * hd.h;
            if (x - c).abs() > 1e-9 * hd.h.max(c.abs()) {
                return Err(Error::Parse(format!("row {} does not match the header grid", i + 1)));
            }
        }
        Self::new(hd.x0, hd.h, ds).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn read_two_columns(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut xs = Vec::new();
    let mut ds = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("row {} has {} fields, expected 2", i + 1, rec.len())));
        }
        let x = parse_f64(&rec[0]).ok_or_else(|| Error::Parse(format!("row {}: bad x", i + 1)))?;
        let d = parse_f64(&rec[1]).ok_or_else(|| Error::Parse(format!("row {}: bad density", i + 1)))?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("row {}: x is not finite", i + 1)));
        }
        xs.push(x);
        ds.push(d);
    }
    Ok((xs, ds))
}

/// ∫_a^b |x| dx.
fn abs_integral(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (b * b - a * a)
    } else if b <= 0.0 {
        0.5 * (a * a - b * b)
    } else {
        0.5 * (a * a + b * b)
    }
}

/// Antiderivative of ln|u|, vanishing at 0.
fn g_log(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.abs().ln() - u
    }
}

/// U[μ](x) = ∫ ln|x − y| dμ(y), exact for the piecewise-constant density.
pub fn log_potential(mu: &GriddedMeasure, x: f64) -> f64 {
    mu.density
        .iter()
        .enumerate()
        .filter(|(_, &d)| d != 0.0)
        .map(|(i, &d)| d * (g_log(x - mu.edge(i)) - g_log(x - mu.edge(i + 1))))
        .sum()
}

const DIRECT_LIMIT: usize = 512;

/// Toeplitz convolution with the cell-integrated logarithm,
/// (Kw)_i = Σ_j w_j ∫_{cell j} ln|c_i − y| dy, evaluated at cell centres.
pub struct LogKernel {
    n: usize,
    taps: Vec<f64>,
    fft: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>, Vec<Complex<f64>>)>,
}

impl LogKernel {
    pub fn new(h: f64, n: usize) -> Self {
        // taps[d] for d = 0..n−1; the kernel is even in d
        let taps: Vec<f64> = (0..n).map(|d| g_log((d as f64 + 0.5) * h) - g_log((d as f64 - 0.5) * h)).collect();
        let fft = if n > DIRECT_LIMIT {
            let len = (2 * n).next_power_of_two();
            let mut planner = FftPlanner::new();
            let fwd = planner.plan_fft_forward(len);
            let inv = planner.plan_fft_inverse(len);
            let mut k = vec![Complex::new(0.0, 0.0); len];
            for d in 0..n {
                k[d].re = taps[d];
                if d > 0 {
                    k[len - d].re = taps[d];
                }
            }
            fwd.process(&mut k);
            Some((fwd, inv, k))
        } else {
            None
        };
        LogKernel { n, taps, fft }
    }

    pub fn for_measure(mu: &GriddedMeasure) -> Self {
        Self::new(mu.h, mu.n())
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n, "kernel size mismatch");
        match &self.fft {
            None => {
                (0..self.n).map(|i| w.iter().enumerate().map(|(j, &x)| x * self.taps[i.abs_diff(j)]).sum()).collect()
            }
            Some((fwd, inv, k)) => {
                let len = k.len();
                let mut buf = vec![Complex::new(0.0, 0.0); len];
                for (b, &x) in buf.iter_mut().zip(w) {
                    b.re = x;
                }
                fwd.process(&mut buf);
                for (b, kk) in buf.iter_mut().zip(k) {
                    *b *= kk;
                }
                inv.process(&mut buf);
                let scale = 1.0 / len as f64;
                buf[..self.n].iter().map(|z| z.re * scale).collect()
            }
        }
    }
}

/// U[μ] at every cell centre.
pub fn potential_at_centers(mu: &GriddedMeasure) -> Vec<f64> {
    LogKernel::for_measure(mu).apply(&mu.density)
}

/// Ent[μ] = −∫ρ ln ρ.
pub fn entropy(mu: &GriddedMeasure) -> f64 {
    -mu.density.iter().filter(|&&d| d > 0.0).map(|&d| d * d.ln()).sum::<f64>() * mu.h
}

/// ∫|ρ_μ − ρ_ν| on the common refinement of both grids.
pub fn total_variation(mu: &GriddedMeasure, nu: &GriddedMeasure) -> f64 {
    let mut edges: Vec<f64> = (0..=mu.n()).map(|i| mu.edge(i)).chain((0..=nu.n()).map(|i| nu.edge(i))).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let at = |m: &GriddedMeasure, x: f64| -> f64 {
        let k = ((x - m.x0) / m.h).floor();
        if k < 0.0 || k >= m.n() as f64 {
            0.0
        } else {
            m.density[k as usize]
        }
    };
    edges.windows(2).map(|w| (at(mu, 0.5 * (w[0] + w[1])) - at(nu, 0.5 * (w[0] + w[1]))).abs() * (w[1] - w[0])).sum()
}

/// Signed atoms of μ − ν at cell centres, merged and sorted.
fn bl_atoms(mu: &GriddedMeasure, nu: &GriddedMeasure) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = Vec::with_capacity(mu.n() + nu.n());
    for (i, &d) in mu.density.iter().enumerate() {
        if d != 0.0 {
            v.push((mu.center(i), d * mu.h));
        }
    }
    for (i, &d) in nu.density.iter().enumerate() {
        if d != 0.0 {
            v.push((nu.center(i), -d * nu.h));
        }
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (x, w) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out.retain(|a| a.1 != 0.0);
    out
}

/// max Σ w_i f(x_i) over |f| ≤ s, Lip(f) ≤ 1 − s, by dynamic programming on a
/// concave piecewise-linear value function of the current f-value.
fn bl_value(atoms: &[(f64, f64)], s: f64) -> f64 {
    if atoms.is_empty() || s <= 0.0 {
        return 0.0;
    }
    let lip = 1.0 - s;
    let w0 = atoms[0].1;
    let mut pts: Vec<(f64, f64)> = vec![(-s, -w0 * s), (s, w0 * s)];
    let mut next: Vec<(f64, f64)> = Vec::new();
    for k in 1..atoms.len() {
        let d = lip * (atoms[k].0 - atoms[k - 1].0);
        let top = pts.iter().enumerate().fold(0, |best, (i, p)| if p.1 > pts[best].1 { i } else { best });
        next.clear();
        next.extend(pts[..=top].iter().map(|p| (p.0 - d, p.1)));
        next.extend(pts[top..].iter().map(|p| (p.0 + d, p.1)));
        clip(&mut next, -s, s);
        let w = atoms[k].1;
        for p in next.iter_mut() {
            p.1 += w * p.0;
        }
        std::mem::swap(&mut pts, &mut next);
    }
    pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
}

fn interp(a: (f64, f64), b: (f64, f64), x: f64) -> (f64, f64) {
    if b.0 == a.0 {
        return (x, a.1.max(b.1));
    }
    let t = (x - a.0) / (b.0 - a.0);
    (x, a.1 + t * (b.1 - a.1))
}

/// Restricts a piecewise-linear function (sorted breakpoints) to [lo, hi].
fn clip(pts: &mut Vec<(f64, f64)>, lo: f64, hi: f64) {
    let mut out = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        let p = pts[k];
        if p.0 < lo {
            if k + 1 < pts.len() && pts[k + 1].0 > lo {
                out.push(interp(p, pts[k + 1], lo));
            }
            continue;
        }
        if p.0 > hi {
            if k > 0 && pts[k - 1].0 < hi {
                out.push(interp(pts[k - 1], p, hi));
            }
            break;
        }
        if out.last().is_none_or(|q: &(f64, f64)| q.0 < p.0) {
            out.push(p);
        } else if let Some(q) = out.last_mut() {
            q.1 = q.1.max(p.1);
        }
    }
    *pts = out;
}

/// Bounded-Lipschitz distance sup{∫f d(μ−ν) : ‖f‖_∞ + Lip(f) ≤ 1}, with both
/// measures represented by point masses at their cell centres.
///
/// For a fixed split s = ‖f‖_∞ the inner problem is a chain and is solved
/// exactly; the optimum is concave in s and located by golden-section search.
pub fn bl_distance(mu: &GriddedMeasure, nu: &GriddedMeasure) -> Result<f64> {
    for (name, m) in [("first", mu), ("second", nu)] {
        if (m.mass - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("{name} measure is not normalized (mass {})", m.mass)));
        }
    }
    let atoms = bl_atoms(mu, nu);
    if atoms.is_empty() {
        return Ok(0.0);
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = bl_value(&atoms, c);
    let mut fd = bl_value(&atoms, d);
    for _ in 0..48 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = bl_value(&atoms, d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = bl_value(&atoms, c);
        }
    }
    Ok(fc.max(fd).max(0.0))
}

/// Push-forward under x ↦ ρx.
pub fn dilate(mu: &GriddedMeasure, rho: f64) -> Result<GriddedMeasure> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("dilation factor must be positive, got {rho}")));
    }
    GriddedMeasure::new(mu.x0 * rho, mu.h * rho, mu.density.iter().map(|d| d / rho).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// μ restricted to [−K1, K2] and renormalized (cut cells keep their inside fraction).
    pub measure: GriddedMeasure,
    pub k1: f64,
    pub k2: f64,
    /// ∫_{−K1}^{K2} x dμ, zero up to rounding by construction.
    pub inner_first_moment: f64,
    pub tail_mass: f64,
    pub tail_abs_moment: f64,
    pub warning: Option<String>,
}

/// Smallest y in [0, ymax] with f(y) ≥ target for non-decreasing f.
fn invert_increasing<F: Fn(f64) -> f64>(f: F, target: f64, ymax: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, ymax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Mean-preserving compactification: with F1(y) = ∫_{−y}^0 |x|dμ and
/// F2(y) = ∫_0^y |x|dμ, K1 solves M1 − F1(K1) = (η/2)·min{1, K̃1, K̃2} where
/// F_i(K̃_i) = M_i/2, and K2 solves F2(K2) = F1(K1), so ∫_{−K1}^{K2} x dμ = 0.
pub fn truncate_mean_preserving(mu: &GriddedMeasure, eta: f64) -> Result<Truncation> {
    let f1 = |y: f64| mu.abs_moment_between(-y, 0.0);
    let f2 = |y: f64| mu.abs_moment_between(0.0, y);
    let ymax = mu.x0.abs().max(mu.x_end().abs());
    let m1 = f1(ymax);
    let m2 = f2(ymax);
    let m = m1.min(m2);
    if !(eta > 0.0) || !(m > 0.0) || eta >= 0.5 * m {
        return Err(Error::Domain(format!("eta must lie in (0, {}), got {eta}", 0.5 * m)));
    }
    let kt1 = invert_increasing(f1, 0.5 * m1, ymax);
    let kt2 = invert_increasing(f2, 0.5 * m2, ymax);
    let gap = 0.5 * eta * 1f64.min(kt1).min(kt2);
    let k1 = invert_increasing(f1, m1 - gap, ymax);
    let target = f1(k1);
    if target > m2 {
        return Err(Error::Domain("positive half cannot balance the negative half; input is not centred".into()));
    }
    let k2 = invert_increasing(f2, target, ymax);
    let inner_first_moment = f2(k2) - f1(k1);
    let inside = mu.mass_between(-k1, k2);
    let tail_mass = mu.mass - inside;
    let tail_abs_moment = m1 + m2 - f1(k1) - f2(k2);
    let mut d = vec![0.0; mu.n()];
    let mut warning = None;
    for (i, di) in d.iter_mut().enumerate() {
        let (a, b) = (mu.edge(i), mu.edge(i + 1));
        let lo = a.max(-k1);
        let hi = b.min(k2);
        if hi > lo {
            *di = mu.density[i] * (hi - lo) / mu.h;
        }
        let cut = (a < -k1 && -k1 < b) || (a < k2 && k2 < b);
        if cut && mu.density[i] * mu.h > eta {
            warning = Some(format!("cut falls inside cell {i} which carries more than eta mass"));
        }
    }
    let measure = GriddedMeasure::new(mu.x0, mu.h, d)?.normalized()?;
    Ok(Truncation { measure, k1, k2, inner_first_moment, tail_mass, tail_abs_moment, warning })
}

/// Area of {(x, z) ∈ [0,h]² : z − x ≤ t}.
fn diff_cdf(t: f64, h: f64) -> f64 {
    if t <= -h {
        0.0
    } else if t <= 0.0 {
        0.5 * (h + t) * (h + t)
    } else if t < h {
        h * h - 0.5 * (h - t) * (h - t)
    } else {
        h * h
    }
}

/// Convolution with the uniform density on [−τ, τ], cell-averaged exactly on
/// the input grid extended by ⌈τ/h⌉ + 1 cells per side. Mass and first moment
/// are preserved.
pub fn mollify(mu: &GriddedMeasure, tau: f64) -> Result<GriddedMeasure> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("mollifier width must be positive, got {tau}")));
    }
    let h = mu.h;
    let ext = (tau / h).ceil() as usize + 1;
    // frac[D] = share of a cell's mass landing D cells away (D ≥ 0; even in D)
    let mut frac: Vec<f64> = (0..=ext)
        .map(|dd| {
            let t = dd as f64 * h;
            (diff_cdf(t + tau, h) - diff_cdf(t - tau, h)).max(0.0)
        })
        .collect();
    let total = frac[0] + 2.0 * frac[1..].iter().sum::<f64>();
    frac.iter_mut().for_each(|f| *f /= total);
    let n = mu.n();
    let mut out = vec![0.0; n + 2 * ext];
    for (i, &d) in mu.density.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let c = i + ext;
        out[c] += d * frac[0];
        for (dd, &f) in frac.iter().enumerate().skip(1) {
            out[c - dd] += d * f;
            out[c + dd] += d * f;
        }
    }
    GriddedMeasure::new(mu.x0 - ext as f64 * h, h, out)
}
