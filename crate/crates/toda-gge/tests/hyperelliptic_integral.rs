mod common;

use common::{adaptive, cosine_weight, rel, rng, state_spec, tensor_oracle_three};
use proptest::prelude::*;
use rand::Rng;
use toda_gge::hyperelliptic::*;
use toda_gge::linalg::log_det;
use toda_gge::spectral::SpectralData;

fn two_site() -> SpectralData {
    SpectralData::from_eta(&[-1.0, 1.0], 0.1).unwrap()
}

#[test]
fn two_site_against_cosine_oracle() {
    let sd = two_site();
    let oracle = adaptive(&|t: f64| 1.0 / (1.2 - 0.8 * t.cos().powi(2)).sqrt(), 0.0, std::f64::consts::PI, 1e-14);
    let (_, _, g) = cosine_weight(&sd, 1);
    let oracle2 = adaptive(&g, 0.0, std::f64::consts::PI, 1e-14);
    assert!(rel(oracle, oracle2) < 1e-12);
    let r = integral_i(&sd, 16).unwrap();
    assert_eq!(r.method, Method::DeterminantQuadrature);
    assert_eq!(r.sign, 1.0);
    assert!(rel(r.value(), oracle) < 1e-10, "{} vs {oracle}", r.value());
}

#[test]
fn two_site_order_doubling() {
    let sd = two_site();
    let a = integral_i(&sd, 16).unwrap();
    let b = integral_i(&sd, 32).unwrap();
    assert!((a.log_abs - b.log_abs).abs() < 1e-8);
    assert!(a.est_error >= 0.0);
}

#[test]
fn small_order_rejected() {
    assert!(integral_i(&two_site(), 7).is_err());
}

#[test]
fn non_member_rejected() {
    let mut sd = two_site();
    sd.eps = 0.6;
    assert!(matches!(integral_i(&sd, 16), Err(toda_gge::Error::Domain(_))));
}

#[test]
fn three_site_against_tensor_oracle() {
    for (eta, eps) in [(vec![-1.0, 0.2, 1.5], 0.05), (vec![-2.0, -0.5, 0.7], 0.01), (vec![0.0, 1.0, 3.0], 0.2)] {
        let sd = SpectralData::from_eta(&eta, eps).unwrap();
        let oracle = tensor_oracle_three(&sd);
        let got = integral_i(&sd, 24).unwrap().value();
        assert!(rel(got, oracle) < 1e-5, "{got} vs {oracle}");
    }
}

#[test]
fn three_site_from_states() {
    for seed in 0..4 {
        let sd = state_spec(seed, 3, 1.0);
        let oracle = tensor_oracle_three(&sd);
        let got = integral_i(&sd, 24).unwrap().value();
        assert!(rel(got, oracle) < 1e-5, "seed {seed}: {got} vs {oracle}");
    }
}

#[test]
fn lower_bound_two_site_formula() {
    let sd = two_site();
    let lm = &sd.lambda_minus;
    let a11 = ((lm[1] - sd.eta[0]) / (lm[0] - sd.eta[0])).abs().ln();
    let expect = 2.0 * a11 / (sd.eta[1] - sd.eta[0]);
    let lb = lower_bound_det_a(&sd).unwrap();
    assert!(rel(lb.value(), expect) < 1e-13);
    assert!(lb.value() <= integral_i(&sd, 16).unwrap().value());
}

#[test]
fn sandwich_small_chains() {
    for (seed, n) in [(1u64, 2usize), (2, 3), (3, 4), (4, 5), (5, 6), (6, 8)] {
        let sd = state_spec(seed, n, 1.5);
        let lb = lower_bound_det_a(&sd).unwrap();
        let ii = integral_i(&sd, 24).unwrap();
        let ub = upper_envelope(&sd).unwrap();
        assert_eq!(lb.sign, 1.0);
        assert!(lb.log_abs <= ii.log_abs + 1e-9, "n={n}: lb {} > I {}", lb.log_abs, ii.log_abs);
        assert!(ii.log_abs <= ub.log_abs + 1e-9, "n={n}: I {} > ub {}", ii.log_abs, ub.log_abs);
        let nf = n as f64;
        assert!(ii.log_abs - lb.log_abs <= 2.0 * nf * nf.ln() + 1.0);
    }
}

#[test]
fn envelope_two_and_four() {
    let sd = two_site();
    assert!(upper_envelope(&sd).unwrap().log_abs >= integral_i(&sd, 16).unwrap().log_abs);
    let sd = SpectralData::from_eta(&[-1.5, -0.4, 0.3, 1.6], 0.02).unwrap();
    assert!(upper_envelope(&sd).unwrap().log_abs >= integral_i(&sd, 24).unwrap().log_abs);
}

#[test]
fn envelope_size_limit() {
    let eta: Vec<f64> = (0..13).map(|i| i as f64).collect();
    let sd = SpectralData::from_eta(&eta, 1e-6).unwrap();
    assert!(matches!(upper_envelope(&sd), Err(toda_gge::Error::Size(_))));
}

#[test]
fn phi_examples() {
    assert_eq!(phi_diag_element(1.0, 0.0), 0.0);
    let expect = (101.0 + 2.0 * 2550f64.sqrt()).ln();
    assert!((phi_diag_element(0.01, 1.0) - expect).abs() < 1e-14);
    // integral form, after μ = v²
    let x = 50.0f64;
    let q = 2.0 * adaptive(&|v: f64| 1.0 / (v * v + 1.0).sqrt(), 0.0, x.sqrt(), 1e-15);
    assert!((phi_diag_element(0.01, 1.0) - q).abs() < 1e-12);
}

#[test]
fn phi_matches_endpoint_integral() {
    let mut r = rng(12);
    for _ in 0..20 {
        let delta: f64 = r.gen_range(1e-4..1.0);
        let big: f64 = r.gen_range(0.0..5.0);
        // ∫_0^{Δ/2} du/√(u(u+δ)) with u = w²
        let q = adaptive(&|w: f64| 2.0 / (w * w + delta).sqrt(), 0.0, (big / 2.0).sqrt(), 1e-15);
        assert!((phi_diag_element(delta, big) - q).abs() < 1e-10);
    }
}

#[test]
fn translation_invariance() {
    let sd = state_spec(7, 5, 1.0);
    let c = 3.7;
    let shifted = SpectralData::from_eta(&sd.eta.iter().map(|x| x + c).collect::<Vec<_>>(), sd.eps).unwrap();
    let a = integral_i(&sd, 24).unwrap();
    let b = integral_i(&shifted, 24).unwrap();
    assert!(rel(a.value(), b.value()) < 1e-9);
}

#[test]
fn hat_a_identities() {
    for (seed, n) in [(1u64, 2usize), (2, 4), (3, 6), (4, 8)] {
        let sd = state_spec(seed, n, 1.0);
        let hat = hat_a_matrix(&sd).unwrap();
        for k in 0..n - 1 {
            let s: f64 = hat.row(k).iter().sum();
            assert!(s.abs() < 1e-9, "row {k}: {s}");
        }
        let dh = hat.determinant();
        let da = hat.view((0, 0), (n - 1, n - 1)).into_owned().determinant();
        assert!(rel(dh, n as f64 * da) < 1e-9, "{dh} vs {}", n as f64 * da);
        let lh = log_det(&hat);
        assert!((lh.value() - dh).abs() < 1e-9 * dh.abs());
    }
}

#[test]
fn heuristic_two_site_finite() {
    let sd = two_site();
    let h = heuristic_asymptotic(&sd, 1.0).unwrap();
    assert!(h.is_finite() || h == f64::NEG_INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn prop_sandwich(seed in 0u64..100_000, n in 2usize..7, ell in 0.5f64..3.0) {
        let sd = state_spec(seed, n, ell);
        let lb = lower_bound_det_a(&sd).unwrap();
        let ii = integral_i(&sd, 24).unwrap();
        let ub = upper_envelope(&sd).unwrap();
        prop_assert!(lb.log_abs <= ii.log_abs + 1e-9);
        prop_assert!(ii.log_abs <= ub.log_abs + 1e-9);
    }

    #[test]
    fn prop_translation(seed in 0u64..100_000, n in 2usize..7, c in -5.0f64..5.0) {
        let sd = state_spec(seed, n, 1.0);
        let sh = SpectralData::from_eta(&sd.eta.iter().map(|x| x + c).collect::<Vec<_>>(), sd.eps).unwrap();
        prop_assert!(rel(integral_i(&sd, 24).unwrap().value(), integral_i(&sh, 24).unwrap().value()) < 1e-9);
    }
}
