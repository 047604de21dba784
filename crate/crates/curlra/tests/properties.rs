//! Property tests for the algebraic invariants of the matrix substrate.

use num_complex::Complex64;
use proptest::prelude::*;

use curlra::mat::{Mat, NormKind};
use curlra::qr::abs_det_lu;
use curlra::svd::{norm, pinv_product_bound_check, singular_values, svd, volume};

fn mat_strategy(max_dim: usize) -> impl Strategy<Value = Mat<f64>> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        prop::collection::vec(-10.0f64..10.0, m * n).prop_map(move |data| Mat::from_vec(m, n, data))
    })
}

fn cmat_strategy(max_dim: usize) -> impl Strategy<Value = Mat<Complex64>> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), m * n).prop_map(move |data| {
            Mat::from_vec(
                m,
                n,
                data.into_iter()
                    .map(|(re, im)| Complex64::new(re, im))
                    .collect(),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// ||W||_C <= ||W|| <= ||W||_F <= sqrt(m n) ||W||_C.
    #[test]
    fn norm_chain_real(w in mat_strategy(8)) {
        let c = norm(&w, NormKind::Chebyshev).unwrap();
        let s = norm(&w, NormKind::Spectral).unwrap();
        let f = norm(&w, NormKind::Frobenius).unwrap();
        let (m, n) = w.shape();
        let slack = 1.0 + 1e-12;
        prop_assert!(c <= s * slack + 1e-300);
        prop_assert!(s <= f * slack + 1e-300);
        prop_assert!(f <= ((m * n) as f64).sqrt() * c * slack + 1e-300);
    }

    #[test]
    fn norm_chain_complex(w in cmat_strategy(6)) {
        let c = norm(&w, NormKind::Chebyshev).unwrap();
        let s = norm(&w, NormKind::Spectral).unwrap();
        let f = norm(&w, NormKind::Frobenius).unwrap();
        let (m, n) = w.shape();
        let slack = 1.0 + 1e-12;
        prop_assert!(c <= s * slack + 1e-300);
        prop_assert!(s <= f * slack + 1e-300);
        prop_assert!(f <= ((m * n) as f64).sqrt() * c * slack + 1e-300);
    }

    /// Frobenius norm squared equals the sum of squared singular values.
    #[test]
    fn frobenius_is_sigma_sum(w in mat_strategy(8)) {
        let f2 = w.frobenius_norm().powi(2);
        let s2: f64 = singular_values(&w).unwrap().iter().map(|s| s * s).sum();
        prop_assert!((f2 - s2).abs() <= 1e-10 * f2.max(1e-30));
    }

    /// For square matrices the volume equals |det| from pivoted LU.
    #[test]
    fn volume_matches_determinant(w in mat_strategy(8)) {
        if w.nrows() != w.ncols() {
            return Ok(());
        }
        let v = volume(&w).unwrap();
        let d = abs_det_lu(&w);
        prop_assert!((v - d).abs() <= 1e-8 * d.max(1.0));
    }

    /// The SVD reconstructs and its truncation residual is the tail value.
    #[test]
    fn svd_reconstruction_and_truncation(w in mat_strategy(8)) {
        let f = svd(&w).unwrap();
        let scale = w.frobenius_norm().max(1e-30);
        prop_assert!(w.sub(&f.reconstruct()).frobenius_norm() <= 1e-10 * scale);
        for r in 1..=f.rank() {
            let t = f.truncate(r).unwrap();
            let resid = norm(&w.sub(&t.reconstruct()), NormKind::Spectral).unwrap();
            let expect = if r < f.rank() { f.sigma[r] } else { 0.0 };
            prop_assert!((resid - expect).abs() <= 1e-9 * (1.0 + expect));
        }
    }

    /// ||(G Sigma H)^+|| <= ||G^+|| ||Sigma^+|| ||H^+|| on full-rank triples.
    #[test]
    fn pinv_product_bound(
        seed_g in prop::collection::vec(-5.0f64..5.0, 15),
        seed_s in prop::collection::vec(0.1f64..5.0, 3),
        seed_h in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let g = Mat::from_vec(5, 3, seed_g);
        let sigma: Mat<f64> = Mat::diag(&seed_s);
        let h = Mat::from_vec(3, 4, seed_h);
        // A rank-deficient random draw violates the precondition; only
        // full-rank triples assert.
        if let Ok(ok) = pinv_product_bound_check(&g, &sigma, &h) {
            prop_assert!(ok);
        }
    }
}
