//! Independent oracles for the exponential, ZOH sampling and the
//! discretization error bounds.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedisc::{
    band_extract, delta_norm_bounds, empirical_delta, expm, matrix_norm, project_a, project_b,
    truncate_first_order, truncation_bound, zoh_pair, DenseMatrix, MatrixNormKind,
    DEFAULT_ACCURACY,
};

/// Plain Taylor series; accurate for `|m|_2 <= 2` with 60 terms.
fn taylor_expm(m: &DenseMatrix, terms: usize) -> DenseMatrix {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..terms {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn two_norm(m: &DenseMatrix) -> f64 {
    matrix_norm(m, MatrixNormKind::Two).unwrap()
}

#[test]
fn expm_matches_taylor_on_unit_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = std::time::Instant::now();
    for _ in 0..100 {
        let mut m = uniform(&mut rng, 10, 10);
        let target = rng.random_range(0.0..1.0);
        m *= target / two_norm(&m);
        let got = expm(&m, DEFAULT_ACCURACY).unwrap();
        let oracle = taylor_expm(&m, 60);
        assert!(rel_err(&got, &oracle) <= 1e-10, "{}", rel_err(&got, &oracle));
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn zoh_matches_nonsingular_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let n = 1 + case % 20;
        let m = 1 + case % 3;
        // A shifted diagonal keeps Ahat well conditioned.
        let shift = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            let v: f64 = rng.random_range(1.0..3.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        }));
        let a_hat = uniform(&mut rng, n, n) * (0.5 / n as f64).sqrt() + shift;
        let b_hat = uniform(&mut rng, n, m);
        let tau = rng.random_range(0.05..0.5);
        let (a, b) = zoh_pair(&a_hat, &b_hat, tau).unwrap();
        let e = taylor_expm(&(&a_hat * tau), 60);
        let closed = a_hat.clone().lu().solve(&((&e - DMatrix::identity(n, n)) * &b_hat)).unwrap();
        assert!(rel_err(&a, &e) <= 1e-8);
        assert!(rel_err(&b, &closed) <= 1e-8, "case {case}: {}", rel_err(&b, &closed));
    }
}

#[test]
fn truncation_bound_dominates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let n = 2 + case % 15;
        let a_hat = uniform(&mut rng, n, n);
        let norm = two_norm(&a_hat);
        let tau = rng.random_range(1e-3..1.0) / norm;
        let err = two_norm(&(truncate_first_order(&a_hat, tau).unwrap() - expm(&(&a_hat * tau), DEFAULT_ACCURACY).unwrap()));
        let bound = truncation_bound(norm, tau).unwrap();
        assert!(err <= bound * (1.0 + 1e-12), "case {case}: {err} > {bound}");
    }
}

/// Random bandwidth-`s` matrix with every in-band entry nonzero and
/// `max |a_ij| = alpha`.
fn banded(rng: &mut ChaCha8Rng, n: usize, s: usize, alpha: f64) -> DenseMatrix {
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) <= s {
            let v: f64 = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        } else {
            0.0
        }
    });
    let max = m.amax();
    m *= alpha / max;
    m
}

fn off_band_error(a: &DenseMatrix) -> sparsedisc::DeltaBounds {
    let dense = expm(a, DEFAULT_ACCURACY).unwrap();
    let sparse = project_a(a, 1.0).unwrap();
    empirical_delta(&dense, &sparse).unwrap().1
}

#[test]
fn decay_bounds_dominate_tridiagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [20, 40, 60] {
        for _ in 0..5 {
            let alpha = rng.random_range(0.05..0.5);
            let a = banded(&mut rng, n, 1, alpha);
            let measured = off_band_error(&a);
            let bound = delta_norm_bounds(n, alpha, 1).unwrap();
            assert!(bound.dominates(&measured), "n={n}: {bound:?} vs {measured:?}");
        }
    }
}

/// The entrywise decay estimate is not a true upper bound once the band has
/// width two or more: the first off-band entries of the exponential are
/// larger than the estimate, and all three norm bounds can fail. Kept as a record of the failure.
#[test]
#[ignore = "decay estimate undershoots the first off-band diagonals for s >= 2"]
fn decay_bounds_dominate_wide_band_all_norms() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [20, 40, 60, 100, 200] {
        for _ in 0..3 {
            let alpha = rng.random_range(0.05..0.5);
            let a = banded(&mut rng, n, 4, alpha);
            let measured = off_band_error(&a);
            let bound = delta_norm_bounds(n, alpha, 4).unwrap();
            assert!(bound.dominates(&measured), "n={n}: {bound:?} vs {measured:?}");
        }
    }
}

#[test]
fn projection_keeps_band_values_and_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = banded(&mut rng, 12, 2, 0.4);
    let p = project_a(&a, 0.7).unwrap();
    let e = expm(&(&a * 0.7), DEFAULT_ACCURACY).unwrap();
    assert_eq!(p, band_extract(&e, 2).unwrap());
    let b = DMatrix::from_fn(12, 2, |i, j| if i == 5 * j { 1.0 } else { 0.0 });
    let pb = project_b(&a, &b, 0.7).unwrap();
    for j in 0..2 {
        for i in 0..12usize {
            if i.abs_diff(5 * j) > 2 {
                assert_eq!(pb[(i, j)], 0.0);
            }
        }
    }
}

fn small_matrix(n: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(-1.0f64..1.0, n * n)
        .prop_map(move |v| DMatrix::from_vec(n, n, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup(m in small_matrix(5), s in 0.1f64..2.0, t in 0.1f64..2.0) {
        let lhs = expm(&(&m * (s + t)), DEFAULT_ACCURACY).unwrap();
        let rhs = expm(&(&m * s), DEFAULT_ACCURACY).unwrap() * expm(&(&m * t), DEFAULT_ACCURACY).unwrap();
        prop_assert!(rel_err(&lhs, &rhs) <= 1e-11);
    }

    #[test]
    fn permutation_similarity(m in small_matrix(6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let p = DMatrix::from_fn(6, 6, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
        let lhs = expm(&(&p * &m * p.transpose()), DEFAULT_ACCURACY).unwrap();
        let rhs = &p * expm(&m, DEFAULT_ACCURACY).unwrap() * p.transpose();
        prop_assert!(rel_err(&lhs, &rhs) <= 1e-13);
    }

    #[test]
    fn norm_submultiplicative(m in small_matrix(5), scale in 0.1f64..4.0) {
        let x = &m * scale;
        let e = expm(&x, DEFAULT_ACCURACY).unwrap();
        prop_assert!(two_norm(&e) <= two_norm(&x).exp() * (1.0 + 1e-12));
    }

    #[test]
    fn zoh_scales_linearly_in_b(m in small_matrix(4), c in -3.0f64..3.0) {
        let b = DMatrix::from_fn(4, 1, |i, _| i as f64 - 1.5);
        let (_, b1) = zoh_pair(&m, &b, 0.3).unwrap();
        let (_, b2) = zoh_pair(&m, &(&b * c), 0.3).unwrap();
        prop_assert!((b2 - b1 * c).amax() <= 1e-13 * (1.0 + c.abs()));
    }
}
