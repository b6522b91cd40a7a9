mod common;

use common::{random_matrix, svd_spectral_norm};
use fuselab_core::linalg::{
    frobenius_norm, spectral_norm, spectral_norm_default, sym_eig, Matrix,
};
use fuselab_core::rng::seeded_rng;
use proptest::prelude::*;

#[test]
fn spectral_norm_matches_one_sided_jacobi_oracle() {
    let mut rng = seeded_rng(0x5eed_11);
    for case in 0..200 {
        let rows = 1 + case % 8;
        let cols = 1 + (case / 3) % 8;
        let m = random_matrix(&mut rng, rows, cols, 4.0);
        let oracle = svd_spectral_norm(&m);
        // Tight explicit budgets: this checks the algorithm against an
        // independent route, not the default iteration budget.
        let est = spectral_norm(&m, 1e-11, 20_000).unwrap();
        let err = (est.value - oracle).abs();
        assert!(
            err <= 1e-8 * oracle.max(1.0),
            "case {case} ({rows}x{cols}): power iteration {} vs jacobi oracle {oracle}",
            est.value
        );
    }
}

#[test]
fn spectral_norm_is_deterministic_bitwise() {
    let mut rng = seeded_rng(0x5eed_12);
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 5, 7, 2.0);
        let a = spectral_norm_default(&m).unwrap();
        let b = spectral_norm_default(&m).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }
}

#[test]
fn sym_eig_reconstructs_random_symmetric_6x6() {
    let mut rng = seeded_rng(0x5eed_13);
    for case in 0..50 {
        let raw = random_matrix(&mut rng, 6, 6, 3.0);
        let m = raw.add(&raw.transpose()).scaled(0.5);
        let eig = sym_eig(&m).unwrap();
        let lam = Matrix::from_fn(6, 6, |r, c| if r == c { eig.values[r] } else { 0.0 });
        let rec = eig.vectors.matmul(&lam).matmul(&eig.vectors.transpose());
        let err = frobenius_norm(&rec.sub(&m)).unwrap();
        let scale = frobenius_norm(&m).unwrap().max(1.0);
        assert!(err <= 1e-8 * scale, "case {case}: reconstruction error {err}");
    }
}

#[test]
fn sym_eig_eigenvalues_match_squared_singular_values() {
    // For B = A^T A, eigenvalues of B are squared singular values of A; the
    // two routes (two-sided Jacobi vs one-sided Jacobi) must agree.
    let mut rng = seeded_rng(0x5eed_14);
    for _ in 0..30 {
        let a = random_matrix(&mut rng, 6, 4, 2.0);
        let b = a.transpose().matmul(&a);
        let eig = sym_eig(&b).unwrap();
        let sv = common::svd_singular_values(&a);
        for (lambda, sigma) in eig.values.iter().zip(&sv) {
            assert!(
                (lambda - sigma * sigma).abs() <= 1e-8 * (sigma * sigma).max(1.0),
                "eigenvalue {lambda} vs squared singular value {}",
                sigma * sigma
            );
        }
    }
}

fn small_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..6)
        .prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |data| Matrix::new(r, c, data).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_norm_scales_absolutely_homogeneously(m in small_matrix(), c in -4.0f64..4.0) {
        let base = spectral_norm_default(&m).unwrap().value;
        let scaled = spectral_norm_default(&m.scaled(c)).unwrap().value;
        let expected = c.abs() * base;
        prop_assert!((scaled - expected).abs() <= 1e-7 * expected.max(1e-9),
            "|c|*sigma = {expected}, got {scaled}");
    }

    #[test]
    fn spectral_norm_never_exceeds_frobenius(m in small_matrix()) {
        let s = spectral_norm_default(&m).unwrap().value;
        let f = frobenius_norm(&m).unwrap();
        prop_assert!(s <= f * (1.0 + 1e-10) + 1e-12, "sigma {s} > frobenius {f}");
    }

    #[test]
    fn sym_eig_preserves_trace_and_orders_descending(m in small_matrix()) {
        let sym = m.matmul(&m.transpose()); // symmetric PSD, square
        let eig = sym_eig(&sym).unwrap();
        let trace: f64 = (0..sym.rows()).map(|i| sym.get(i, i)).sum();
        let lam_sum: f64 = eig.values.iter().sum();
        let scale = frobenius_norm(&sym).unwrap().max(1.0);
        prop_assert!((trace - lam_sum).abs() <= 1e-9 * scale);
        for w in eig.values.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12 * scale, "not descending: {:?}", eig.values);
        }
        // Columns orthonormal.
        let vtv = eig.vectors.transpose().matmul(&eig.vectors);
        let err = frobenius_norm(&vtv.sub(&Matrix::identity(sym.rows()))).unwrap();
        prop_assert!(err <= 1e-10, "V^T V deviates from identity by {err}");
    }
}
