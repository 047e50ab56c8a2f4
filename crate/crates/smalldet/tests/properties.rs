//! Property tests for the spec-level invariants that hold on whole input
//! regions rather than pinned cases.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use smalldet::{
    build_ordering, compute_d_values, estimate_det_small_dev_range, gaussian_interval_prob,
    gram_det, materialize_covariance, square_det, CovarianceSpec, DetEvent, McConfig,
};

fn small_matrix(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-100.0..100.0f64, n * m)
        .prop_map(move |data| DMatrix::from_row_slice(n, m, &data))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interval_prob_is_maximal_at_zero_shift(
        sigma in 0.0..20.0f64,
        shift in -10.0..10.0f64,
        eps in 0.0..10.0f64,
    ) {
        let centered = gaussian_interval_prob(sigma, 0.0, eps).unwrap();
        let shifted = gaussian_interval_prob(sigma, shift, eps).unwrap();
        prop_assert!(shifted <= centered + 1e-15);
        prop_assert!((0.0..=1.0).contains(&shifted));
    }

    #[test]
    fn interval_prob_monotone_in_eps(
        sigma in 0.01..10.0f64,
        shift in -5.0..5.0f64,
        eps in 0.0..5.0f64,
        delta in 0.0..5.0f64,
    ) {
        let narrow = gaussian_interval_prob(sigma, shift, eps).unwrap();
        let wide = gaussian_interval_prob(sigma, shift, eps + delta).unwrap();
        prop_assert!(wide >= narrow - 1e-15);
    }

    #[test]
    fn ordering_prefix_property(n in 1usize..=6, extra in 0usize..=4) {
        let m = n + extra;
        let ord = build_ordering(n, m).unwrap();
        prop_assert_eq!(ord.len(), n * m);
        for k in 1..=n {
            let diag = ord.diagonal_position(k);
            for (pos, e) in ord.entries().iter().enumerate() {
                if e.group() < k {
                    prop_assert!(pos < diag);
                }
            }
        }
    }

    #[test]
    fn gram_det_monotone_under_column_append(
        n in 1usize..=4,
        extra in 0usize..=3,
        seed_data in prop::collection::vec(-10.0..10.0f64, 4 * 7 + 4),
    ) {
        let m = n + extra;
        let a = DMatrix::from_fn(n, m, |r, c| seed_data[r * 7 + c]);
        let col = DVector::from_fn(n, |r, _| seed_data[4 * 7 + r]);
        let mut b = DMatrix::zeros(n, m + 1);
        b.view_mut((0, 0), (n, m)).copy_from(&a);
        b.set_column(m, &col);
        let da = gram_det(&a).unwrap().det;
        let db = gram_det(&b).unwrap().det;
        // scale-aware slack: dets grow like entry^2n
        let scale = da.abs().max(db.abs()).max(1.0);
        prop_assert!(db >= da - 1e-9 * scale);
        prop_assert!(da >= 0.0 && db >= 0.0);
    }

    #[test]
    fn square_det_row_scaling(mat in small_matrix(3, 3), c in -4.0..4.0f64) {
        prop_assume!(c.abs() > 1e-3);
        let base = square_det(&mat).unwrap();
        let mut scaled = mat.clone();
        for j in 0..3 {
            scaled[(0, j)] *= c;
        }
        let got = square_det(&scaled).unwrap();
        if base.sign == 0 {
            prop_assert_eq!(got.sign, 0);
        } else {
            // scaling one row scales the determinant by c
            prop_assert_eq!(got.sign, base.sign * c.signum() as i8);
            let want = base.log_abs_det + c.abs().ln();
            prop_assert!((got.log_abs_det - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn gram_det_invariant_under_column_permutation(
        mat in small_matrix(3, 5),
        swap_a in 0usize..5,
        swap_b in 0usize..5,
    ) {
        let mut permuted = mat.clone();
        permuted.swap_columns(swap_a, swap_b);
        let base = gram_det(&mat).unwrap();
        let got = gram_det(&permuted).unwrap();
        prop_assert_eq!(got.sign, base.sign);
        if base.sign != 0 {
            prop_assert!(
                (got.log_abs_det - base.log_abs_det).abs()
                    <= 1e-8 * base.log_abs_det.abs().max(1.0)
            );
        }
    }

    #[test]
    fn residual_variances_stay_in_range(
        rho in -0.3..0.9f64,
        n in 1usize..=3,
        extra in 0usize..=2,
    ) {
        let spec = CovarianceSpec::Equicorrelated { rho };
        let m = n + extra;
        let ordering = build_ordering(n, m).unwrap();
        match compute_d_values(&spec, n, m) {
            Ok(d) => {
                let sigma = materialize_covariance(&spec, &ordering).unwrap();
                for (k, &v) in d.values().iter().enumerate() {
                    let pos = ordering.diagonal_position(k + 1);
                    prop_assert!(v >= 0.0);
                    prop_assert!(v <= sigma[(pos, pos)] + 1e-10);
                }
            }
            // strongly negative rho fails the PSD gate; that is the contract
            Err(smalldet::Error::NotPositiveSemidefinite(_)) => {
                prop_assert!(rho < 0.0);
            }
            Err(other) => return Err(TestCaseError::fail(format!("unexpected error {other}"))),
        }
    }
}

proptest! {
    // merges run real (small) estimations; keep the case count low
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn merge_commutes_and_pools_counts(
        split in 1u64..999,
        seed in 0u64..1000,
    ) {
        let total = 1000u64;
        let cfg = McConfig {
            trials: total,
            base_seed: seed,
            workers: 1,
            confidence: 0.99,
        };
        let run = |start: u64, count: u64| {
            estimate_det_small_dev_range(
                &CovarianceSpec::Iid, 2, 2, DetEvent::SquareAbsDet, 0.3, &cfg, start, count,
            )
            .unwrap()
        };
        let full = run(0, total);
        let a = run(0, split);
        let b = run(split, total - split);
        let ab = a.merge(&b).unwrap();
        let ba = b.merge(&a).unwrap();
        prop_assert_eq!(ab.hits, full.hits);
        prop_assert_eq!(ab.trials, full.trials);
        prop_assert_eq!(ba.hits, ab.hits);
        prop_assert!(ab.ci_low <= ab.p_hat && ab.p_hat <= ab.ci_high);
    }
}
