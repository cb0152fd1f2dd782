mod common;

use common::{jacobi_eigenvalues, rel, rng};
use proptest::prelude::*;
use rand::Rng;
use toda_gge::spectral::eig_periodic;
use toda_gge::toda::*;

fn random_state(seed: u64, n: usize) -> FlaschkaState {
    let mut r = rng(seed);
    let a = (0..n).map(|_| r.gen_range(0.3..1.5)).collect();
    let b = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    FlaschkaState::new(a, b).unwrap()
}

#[test]
fn lax_plus_all_ones() {
    let s = FlaschkaState::new(vec![1.0; 3], vec![0.0; 3]).unwrap();
    let m = lax_matrix(&s, Sign::Plus);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m[(i, j)], if i == j { 0.0 } else { 1.0 });
        }
    }
}

#[test]
fn lax_minus_flips_corners() {
    let s = FlaschkaState::new(vec![1.0; 3], vec![0.0; 3]).unwrap();
    let m = lax_matrix(&s, Sign::Minus);
    assert_eq!(m[(0, 2)], -1.0);
    assert_eq!(m[(2, 0)], -1.0);
    assert_eq!(m[(0, 1)], 1.0);
    assert_eq!(m[(1, 2)], 1.0);
}

#[test]
fn lax_two_site_corner_sums() {
    let s = FlaschkaState::new(vec![0.7, 0.2], vec![0.1, -0.3]).unwrap();
    assert!((lax_matrix(&s, Sign::Plus)[(0, 1)] - 0.9).abs() < 1e-15);
    assert!((lax_matrix(&s, Sign::Minus)[(1, 0)] - 0.5).abs() < 1e-15);
}

#[test]
fn lax_four_site_matches_jacobi_oracle() {
    let s = FlaschkaState::new(vec![1.0, 0.5, 2.0, 0.8], vec![0.3, -0.1, 0.4, -0.6]).unwrap();
    let m = lax_matrix(&s, Sign::Plus);
    // assemble independently
    let mut e = nalgebra::DMatrix::zeros(4, 4);
    let (a, b) = ([1.0, 0.5, 2.0, 0.8], [0.3, -0.1, 0.4, -0.6]);
    for i in 0..4 {
        e[(i, i)] = b[i];
        e[(i, (i + 1) % 4)] = a[i];
        e[((i + 1) % 4, i)] = a[i];
    }
    assert_eq!(m, e);
    let oracle = jacobi_eigenvalues(&e);
    let got = eig_periodic(&s, Sign::Plus).unwrap();
    for (x, y) in got.iter().zip(&oracle) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
}

#[test]
fn lax_rejects_short_chain() {
    assert!(FlaschkaState::new(vec![1.0], vec![0.0]).is_err());
    assert!(FlaschkaState::new(vec![1.0, -1.0], vec![0.0, 0.0]).is_err());
}

#[test]
fn hamiltonian_examples() {
    let s = FlaschkaState::new(vec![1.0; 3], vec![0.0; 3]).unwrap();
    assert_eq!(hamiltonian(&s), 3.0);
    let s = FlaschkaState::new(vec![2.0, 1.0], vec![1.0, -1.0]).unwrap();
    assert_eq!(hamiltonian(&s), 6.0);
}

#[test]
fn hamiltonian_matches_trace_of_square() {
    for seed in 0..20 {
        let s = random_state(seed, 3 + seed as usize % 6);
        let t2 = conserved_traces(&s, 2)[1];
        let sb2: f64 = s.b().iter().map(|x| x * x).sum();
        let sa2: f64 = s.a().iter().map(|x| x * x).sum();
        assert!(rel(t2, sb2 + 2.0 * sa2) < 1e-12);
        assert!(rel(hamiltonian(&s), 0.5 * t2) < 1e-12);
    }
}

#[test]
fn flow_zero_time_is_identity() {
    let s = random_state(3, 6);
    assert_eq!(flow(&s, 0.0, 1e-10).unwrap(), s);
}

#[test]
fn flow_isospectral_and_leaf_invariants() {
    let s = random_state(11, 8);
    let f = flow(&s, 5.0, 1e-10).unwrap();
    for sign in [Sign::Plus, Sign::Minus] {
        let e0 = eig_periodic(&s, sign).unwrap();
        let e1 = eig_periodic(&f, sign).unwrap();
        let scale = e0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() / scale <= 1e-8, "{x} vs {y}");
        }
    }
    assert!(rel(f.sum_b(), s.sum_b()) <= 1e-10 || (f.sum_b() - s.sum_b()).abs() < 1e-13);
    assert!(rel(f.prod_a(), s.prod_a()) <= 1e-10);
}

#[test]
fn flow_preserves_third_trace() {
    let s = random_state(5, 7);
    let f = flow(&s, 2.0, 1e-10).unwrap();
    assert!(rel(conserved_traces(&f, 3)[2], conserved_traces(&s, 3)[2]) <= 1e-8);
}

#[test]
fn flow_backward_returns() {
    let s = random_state(7, 5);
    let f = flow(&flow(&s, 1.5, 1e-12).unwrap(), -1.5, 1e-12).unwrap();
    for (x, y) in f.b().iter().zip(s.b()) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn traces_all_ones() {
    let s = FlaschkaState::new(vec![1.0; 3], vec![0.0; 3]).unwrap();
    let t = conserved_traces(&s, 2);
    assert!(t[0].abs() < 1e-15);
    assert!((t[1] - 6.0).abs() < 1e-14);
}

#[test]
fn local_traces_match_dense_powers() {
    for (seed, n) in [(1u64, 2usize), (2, 3), (3, 5), (4, 9)] {
        let s = random_state(seed, n);
        let dense = conserved_traces(&s, 6);
        let coeffs = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let t6 = poly_trace(s.a(), s.b(), &coeffs);
        assert!(rel(t6, dense[5]) < 1e-12, "n={n}: {t6} vs {}", dense[5]);
        let t3 = poly_trace(s.a(), s.b(), &[0.0, 0.0, 0.0, 1.0]);
        assert!((t3 - dense[2]).abs() < 1e-12 * (1.0 + dense[2].abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_flow_isospectral(seed in 0u64..10_000, n in 3usize..7, t in 0.1f64..2.0) {
        let s = random_state(seed, n);
        let f = flow(&s, t, 1e-11).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let e0 = eig_periodic(&s, sign).unwrap();
            let e1 = eig_periodic(&f, sign).unwrap();
            let scale = e0.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for (x, y) in e0.iter().zip(&e1) {
                prop_assert!((x - y).abs() / scale <= 1e-8);
            }
        }
        prop_assert!((f.sum_b() - s.sum_b()).abs() <= 1e-10 * (1.0 + s.sum_b().abs()));
        prop_assert!(rel(f.prod_a(), s.prod_a()) <= 1e-10);
    }

    #[test]
    fn prop_trace_square_identity(seed in 0u64..10_000, n in 3usize..12) {
        let s = random_state(seed, n);
        let t2 = conserved_traces(&s, 2)[1];
        let sb2: f64 = s.b().iter().map(|x| x * x).sum();
        let sa2: f64 = s.a().iter().map(|x| x * x).sum();
        prop_assert!(rel(t2, sb2 + 2.0 * sa2) < 1e-12);
    }

    #[test]
    fn prop_lax_symmetric(seed in 0u64..10_000, n in 2usize..10) {
        let s = random_state(seed, n);
        for sign in [Sign::Plus, Sign::Minus] {
            let m = lax_matrix(&s, sign);
            prop_assert_eq!(m.clone(), m.transpose());
        }
    }
}
