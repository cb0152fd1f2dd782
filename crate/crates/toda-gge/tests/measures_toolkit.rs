mod common;

use common::{adaptive, bl_lp_oracle, rng};
use proptest::prelude::*;
use rand::Rng;
use toda_gge::measures::*;

fn cell_at(x: f64, h: f64, lo: f64, cells: usize) -> GriddedMeasure {
    let g = GridSpec::new(lo, lo + h * cells as f64, cells).unwrap();
    let i = ((x - lo) / h).floor() as usize;
    let mut m = vec![0.0; cells];
    m[i] = 1.0;
    GriddedMeasure::from_masses(g, &m).unwrap()
}

fn random_measure(seed: u64, grid: GridSpec, sparsity: f64) -> GriddedMeasure {
    let mut r = rng(seed);
    let m: Vec<f64> = (0..grid.cells).map(|_| if r.gen::<f64>() < sparsity { 0.0 } else { r.gen::<f64>() }).collect();
    let tot: f64 = m.iter().sum();
    let m: Vec<f64> = if tot == 0.0 {
        let mut z = vec![0.0; grid.cells];
        z[grid.cells / 2] = 1.0;
        z
    } else {
        m.iter().map(|x| x / tot).collect()
    };
    GriddedMeasure::from_masses(grid, &m).unwrap()
}

fn atoms(mu: &GriddedMeasure, nu: &GriddedMeasure) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = Vec::new();
    for (i, &d) in mu.density().iter().enumerate() {
        v.push((mu.center(i), d * mu.h()));
    }
    for (i, &d) in nu.density().iter().enumerate() {
        v.push((nu.center(i), -d * nu.h()));
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (x, w) in v {
        match out.last_mut() {
            Some(l) if l.0 == x => l.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

#[test]
fn bl_self_is_zero() {
    let mu = random_measure(1, GridSpec::new(-2.0, 2.0, 64).unwrap(), 0.3);
    assert_eq!(bl_distance(&mu, &mu).unwrap(), 0.0);
}

#[test]
fn bl_point_masses() {
    for t in [0.25, 1.0, 3.0] {
        let a = cell_at(0.0, 0.25, -1.0, 32);
        let b = cell_at(t, 0.25, -1.0, 32);
        let d = bl_distance(&a, &b).unwrap();
        assert!((d - 2.0 * t / (2.0 + t)).abs() < 1e-9, "t={t}: {d}");
    }
    let a = cell_at(0.0, 0.25, -1.0, 32);
    let b = cell_at(1.0, 0.25, -1.0, 32);
    assert!((bl_distance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn bl_matches_lp_oracle() {
    for seed in 0..12 {
        let g1 = GridSpec::new(-1.5, 1.5, 12).unwrap();
        let g2 = GridSpec::new(-1.0, 2.0, 9).unwrap();
        let mu = random_measure(seed, g1, 0.2);
        let nu = random_measure(seed + 100, if seed % 2 == 0 { g1 } else { g2 }, 0.2);
        let d = bl_distance(&mu, &nu).unwrap();
        let oracle = bl_lp_oracle(&atoms(&mu, &nu));
        assert!((d - oracle).abs() < 1e-8, "seed {seed}: {d} vs {oracle}");
    }
}

#[test]
fn bl_bounded_by_total_variation() {
    let g = GridSpec::new(-3.0, 3.0, 40).unwrap();
    for seed in 0..10 {
        let mu = random_measure(seed, g, 0.5);
        let nu = random_measure(seed + 50, g, 0.5);
        let d = bl_distance(&mu, &nu).unwrap();
        let tv = total_variation(&mu, &nu);
        assert!(d <= tv + 1e-12 && tv <= 2.0 + 1e-12);
    }
}

#[test]
fn bl_rejects_unnormalized() {
    let g = GridSpec::new(0.0, 1.0, 4).unwrap();
    let m = GriddedMeasure::from_masses(g, &[0.5, 0.5, 0.5, 0.0]).unwrap();
    assert!(bl_distance(&m, &m).is_err());
}

#[test]
fn potential_uniform_closed_forms() {
    let mu = GriddedMeasure::uniform(-0.5, 0.5, 100).unwrap();
    assert!((log_potential(&mu, 0.0) - (0.5f64.ln() - 1.0)).abs() < 1e-13);
    let far = log_potential(&mu, 10.0);
    // ln 10 − Σ_k m_{2k}/(2k·10^{2k}), m_2 = 1/12
    let series = 10f64.ln() - 1.0 / (12.0 * 2.0 * 100.0) - 1.0 / (80.0 * 4.0 * 1e4);
    assert!((far - 10f64.ln()).abs() < 1.0 / 200.0);
    assert!((far - series).abs() < 1e-9);
}

#[test]
fn potential_even_for_even_measure() {
    let g = GridSpec::symmetric(3.0, 60).unwrap();
    let mu = GriddedMeasure::from_fn(g, |x| (-x * x).exp()).unwrap().normalized().unwrap();
    for x in [0.1, 0.77, 2.5, 4.0] {
        assert!((log_potential(&mu, x) - log_potential(&mu, -x)).abs() < 1e-13);
    }
}

#[test]
fn potential_against_quadrature() {
    let g = GridSpec::new(-1.0, 2.0, 7).unwrap();
    let mu = random_measure(3, g, 0.0);
    for x in [-2.0, 0.3, 0.5, 1.9, 5.0] {
        let mut q = 0.0;
        for i in 0..mu.n() {
            let (a, b) = (mu.edge(i), mu.edge(i + 1));
            // ∫ ln|u| over [p, q] ∌ 0 interior, via u = L v³ to tame the endpoint log
            let side = |l: f64| {
                if l <= 0.0 {
                    0.0
                } else {
                    adaptive(&|v: f64| 3.0 * l * v * v * (l * v * v * v).ln(), 0.0, 1.0, 1e-15)
                }
            };
            let piece = if x > a && x < b {
                side(x - a) + side(b - x)
            } else if x >= b {
                side(x - a) - side(x - b)
            } else {
                side(b - x) - side(a - x)
            };
            q += mu.density()[i] * piece;
        }
        assert!((log_potential(&mu, x) - q).abs() < 1e-9, "x={x}");
    }
}

#[test]
fn kernel_matches_pointwise_potential() {
    for cells in [40usize, 1500] {
        let g = GridSpec::symmetric(4.0, cells).unwrap();
        let mu = random_measure(9, g, 0.4);
        let u = potential_at_centers(&mu);
        for i in (0..cells).step_by(cells / 20) {
            assert!((u[i] - log_potential(&mu, mu.center(i))).abs() < 1e-11, "cells={cells}, i={i}");
        }
    }
}

#[test]
fn entropy_examples() {
    assert!(entropy(&GriddedMeasure::uniform(0.0, 1.0, 10).unwrap()).abs() < 1e-15);
    assert!((entropy(&GriddedMeasure::uniform(0.0, 2.0, 10).unwrap()) - 2f64.ln()).abs() < 1e-14);
    let g = GridSpec::symmetric(12.0, 4000).unwrap();
    let mu = GriddedMeasure::from_fn(g, |x| (-x * x / 2.0).exp()).unwrap().normalized().unwrap();
    let expect = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    assert!((entropy(&mu) - expect).abs() < 1e-4);
}

#[test]
fn moments() {
    let mu = GriddedMeasure::uniform(-1.0, 1.0, 10).unwrap();
    assert!(mu.mean().abs() < 1e-15);
    assert!((mu.second_moment() - 1.0 / 3.0).abs() < 1e-14);
    assert!((mu.integrate(|x| x.powi(4)) - 0.2).abs() < 1e-14);
}

#[test]
fn dilate_uniform() {
    let mu = GriddedMeasure::uniform(-1.0, 1.0, 16).unwrap();
    let d = dilate(&mu, 2.0).unwrap();
    let expect = GriddedMeasure::uniform(-2.0, 2.0, 16).unwrap();
    assert_eq!(d.x0(), expect.x0());
    assert_eq!(d.h(), expect.h());
    for (a, b) in d.density().iter().zip(expect.density()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn dilate_shifts_potential() {
    let mu = random_measure(4, GridSpec::new(-1.0, 1.5, 30).unwrap(), 0.2);
    for rho in [1.5, 3.0] {
        let d = dilate(&mu, rho).unwrap();
        for x in [-0.8, 0.1, 0.9, 3.0] {
            assert!((log_potential(&d, rho * x) - log_potential(&mu, x) - rho.ln()).abs() < 1e-8);
        }
    }
}

#[test]
fn truncate_symmetric_and_tails() {
    let g = GridSpec::symmetric(8.0, 800).unwrap();
    let mu = GriddedMeasure::from_fn(g, |x| (-x.abs()).exp()).unwrap().normalized().unwrap();
    for eta in [0.1, 0.01, 1e-4] {
        let t = truncate_mean_preserving(&mu, eta).unwrap();
        assert!((t.k1 - t.k2).abs() < 1e-12, "{} vs {}", t.k1, t.k2);
        assert!(t.inner_first_moment.abs() < 1e-10);
        assert!(t.tail_mass <= eta && t.tail_abs_moment <= eta + 1e-12);
        assert!((t.measure.mass() - 1.0).abs() < 1e-12);
        assert!(t.measure.mean().abs() < 1e-10);
    }
    assert!(truncate_mean_preserving(&mu, 0.6).is_err());
}

#[test]
fn truncate_skewed_centred() {
    // mixture of exponentials arranged to have mean zero
    let g = GridSpec::new(-20.0, 10.0, 3000).unwrap();
    let raw =
        GriddedMeasure::from_fn(g, |x| if x < 0.0 { 0.5 * (x / 2.0).exp() } else { 2.0 * (-2.0 * x).exp() }).unwrap();
    let raw = raw.normalized().unwrap();
    let shift = raw.mean();
    let mu = GriddedMeasure::new(raw.x0() - shift, raw.h(), raw.density().to_vec()).unwrap();
    let t = truncate_mean_preserving(&mu, 0.01).unwrap();
    assert!(t.inner_first_moment.abs() < 1e-10);
    assert!(t.tail_mass <= 0.01 && t.tail_abs_moment <= 0.01 + 1e-12);
    assert!(t.k1 > t.k2);
    let t2 = truncate_mean_preserving(&mu, 0.001).unwrap();
    assert!(t2.k1 >= t.k1 && t2.k2 >= t.k2);
}

#[test]
fn mollify_point_cell() {
    let h = 0.01;
    let mu = cell_at(0.0, h, -1.0, 200);
    let tau = 0.3;
    let m = mollify(&mu, tau).unwrap();
    assert!((m.mass() - 1.0).abs() < 1e-14);
    for i in 0..m.n() {
        let c = m.center(i);
        let d = m.density()[i];
        if c.abs() < tau - 2.0 * h {
            assert!((d - 1.0 / (2.0 * tau)).abs() < 1e-12);
        } else if c.abs() > tau + 2.0 * h {
            assert_eq!(d, 0.0);
        }
    }
}

#[test]
fn mollify_preserves_moments_and_bounds() {
    let g = GridSpec::symmetric(3.0, 120).unwrap();
    for seed in 0..8 {
        let raw = random_measure(seed, g, 0.3);
        let shift = raw.mean();
        let mu = GriddedMeasure::new(raw.x0() - shift, raw.h(), raw.density().to_vec()).unwrap();
        for tau in [0.013, 0.2, 0.77] {
            let m = mollify(&mu, tau).unwrap();
            assert!((m.mass() - 1.0).abs() < 1e-13);
            assert!(m.mean().abs() < 1e-10, "tau={tau}: mean {}", m.mean());
            assert!(entropy(&m) >= entropy(&mu) - 1e-12);
            if tau >= 2.0 * g.h() {
                assert!(bl_distance(&mu, &m).unwrap() <= tau);
            }
        }
    }
}

#[test]
fn csv_round_trip() {
    let mu = random_measure(2, GridSpec::new(-1.25, 3.5, 19).unwrap(), 0.3);
    let text = mu.to_csv();
    let back = GriddedMeasure::from_csv(&text).unwrap();
    assert_eq!(back.density(), mu.density());
    assert!((back.x0() - mu.x0()).abs() < 1e-12 && (back.h() - mu.h()).abs() < 1e-12);
    let exact = GriddedMeasure::from_csv_with_header(&text, &mu.header().to_json()).unwrap();
    assert_eq!(exact, mu);
    assert!(GriddedMeasure::from_csv("x,density\n0,1\n1,-1\n").is_err());
    assert!(GriddedMeasure::from_csv("x,density\n0,1\n1,1\n5,1\n").is_err());
    assert!(MeasureHeader::from_json("{\"x0\":0,\"h\":0,\"n\":3}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_bl_metric(s1 in 0u64..10_000, s2 in 0u64..10_000, s3 in 0u64..10_000) {
        let g = GridSpec::new(-2.0, 2.0, 24).unwrap();
        let (a, b, c) = (random_measure(s1, g, 0.5), random_measure(s2, g, 0.5), random_measure(s3, g, 0.5));
        let ab = bl_distance(&a, &b).unwrap();
        prop_assert!((ab - bl_distance(&b, &a).unwrap()).abs() < 1e-9);
        prop_assert!(ab <= bl_distance(&a, &c).unwrap() + bl_distance(&c, &b).unwrap() + 1e-9);
        prop_assert!(ab <= total_variation(&a, &b) + 1e-12);
    }

    #[test]
    fn prop_dilation_identity(seed in 0u64..10_000, rho in 1.01f64..5.0, x in -3.0f64..3.0) {
        let mu = random_measure(seed, GridSpec::new(-1.0, 1.0, 20).unwrap(), 0.2);
        let d = dilate(&mu, rho).unwrap();
        prop_assert!((log_potential(&d, rho * x) - log_potential(&mu, x) - rho.ln()).abs() < 1e-8);
    }

    #[test]
    fn prop_mollify(seed in 0u64..10_000, tau in 0.05f64..1.0) {
        let g = GridSpec::symmetric(2.0, 80).unwrap();
        let raw = random_measure(seed, g, 0.5);
        let mu = GriddedMeasure::new(raw.x0() - raw.mean(), raw.h(), raw.density().to_vec()).unwrap();
        let m = mollify(&mu, tau).unwrap();
        prop_assert!((m.mass() - mu.mass()).abs() < 1e-13);
        prop_assert!(m.mean().abs() < 1e-10);
        prop_assert!(entropy(&m) >= entropy(&mu) - 1e-12);
        prop_assert!(bl_distance(&mu, &m).unwrap() <= tau);
    }
}
