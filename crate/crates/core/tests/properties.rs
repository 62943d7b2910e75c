//! Randomized invariant checks for the library modules.

use proptest::prelude::*;

use fi_fuse::data::{bootstrap, kfold, normalize, Dataset};
use fi_fuse::explain::normalize_importance;
use fi_fuse::fuse::{
    fuse_box_whiskers, fuse_mean, fuse_median, fuse_mode_kde, fuse_tau_test, kendall_tau,
    kendall_tau_p_value, spearman_rho,
};
use fi_fuse::fuzzy::build_mfs;

fn sources_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6).prop_flat_map(|d| {
        proptest::collection::vec(proptest::collection::vec(0.0..=1.0f64, d), 3..12)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn normalized_importance_in_unit_interval(values in proptest::collection::vec(-1e6..1e6f64, 1..30)) {
        let norm = normalize_importance(&values);
        prop_assert_eq!(norm.len(), values.len());
        prop_assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));
        // either properly scaled or degenerate-constant input
        prop_assert!(
            norm.iter().cloned().fold(0.0f64, f64::max) == 1.0
                || norm.iter().all(|&v| v == 0.0)
        );
    }

    #[test]
    fn normalization_is_idempotent(values in proptest::collection::vec(0.0..=1.0f64, 2..20)) {
        let once = normalize_importance(&values);
        let twice = normalize_importance(&once);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kfold_partitions_every_row_once((n, k, seed) in (4usize..300, 2usize..8, any::<u64>())) {
        prop_assume!(k <= n);
        let plan = kfold(n, k, seed).unwrap();
        let mut seen = vec![0usize; n];
        let mut sizes = Vec::with_capacity(k);
        for fold in 0..k {
            let (train, eval) = plan.split(fold);
            prop_assert_eq!(train.len() + eval.len(), n);
            sizes.push(eval.len());
            for i in eval {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn bootstrap_indices_in_range((n, seed) in (1usize..200, any::<u64>())) {
        let sample = bootstrap(n, seed);
        prop_assert_eq!(sample.indices.len(), n);
        prop_assert!(sample.indices.iter().all(|&i| i < n));
    }

    #[test]
    fn dataset_normalization_bounds_and_idempotence(
        rows in proptest::collection::vec(proptest::collection::vec(-1e3..1e3f64, 3), 2..20)
    ) {
        let ds = Dataset {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            y: vec![0; rows.len()],
            x: rows,
            class_names: vec!["only".into()],
        };
        let norm = normalize(&ds);
        for row in &norm.x {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let again = normalize(&norm);
        for (r1, r2) in norm.x.iter().zip(&again.x) {
            for (a, b) in r1.iter().zip(r2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn location_fusion_within_column_bounds(sources in sources_strategy()) {
        let d = sources[0].len();
        for fused in [
            fuse_mean(&sources).unwrap(),
            fuse_median(&sources).unwrap(),
            fuse_mode_kde(&sources).unwrap(),
            fuse_box_whiskers(&sources).unwrap(),
            fuse_tau_test(&sources, 0.05).unwrap(),
        ] {
            for j in 0..d {
                let col: Vec<f64> = sources.iter().map(|s| s[j]).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(fused[j] >= lo - 1e-9 && fused[j] <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn fusion_is_source_order_invariant(sources in sources_strategy(), rot in 0usize..12) {
        let mut rotated = sources.clone();
        rotated.rotate_left(rot % sources.len());
        for (a, b) in [
            (fuse_mean(&sources).unwrap(), fuse_mean(&rotated).unwrap()),
            (fuse_median(&sources).unwrap(), fuse_median(&rotated).unwrap()),
            (fuse_box_whiskers(&sources).unwrap(), fuse_box_whiskers(&rotated).unwrap()),
            (fuse_tau_test(&sources, 0.05).unwrap(), fuse_tau_test(&rotated, 0.05).unwrap()),
        ] {
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_correlation_identities(x in proptest::collection::vec(-1e3..1e3f64, 3..12)) {
        // any strictly decreasing transform fully reverses the ranking
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let distinct = {
            let mut s = x.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|w| w[0] != w[1])
        };
        if distinct {
            prop_assert!((kendall_tau(&x, &x) - 1.0).abs() < 1e-12);
            prop_assert!((kendall_tau(&x, &neg) + 1.0).abs() < 1e-12);
            prop_assert!((spearman_rho(&x, &x) - 1.0).abs() < 1e-9);
            prop_assert!((spearman_rho(&x, &neg) + 1.0).abs() < 1e-9);
        }
        prop_assert!(kendall_tau(&x, &neg).abs() <= 1.0 + 1e-12);
        prop_assert!(spearman_rho(&x, &neg).abs() <= 1.0 + 1e-9);
        let p = kendall_tau_p_value(&x, &neg);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn rank_correlation_is_symmetric(
        (x, y) in (4usize..10).prop_flat_map(|n| (
            proptest::collection::vec(0.0..1.0f64, n),
            proptest::collection::vec(0.0..1.0f64, n),
        ))
    ) {
        prop_assert!((kendall_tau(&x, &y) - kendall_tau(&y, &x)).abs() < 1e-12);
        prop_assert!((spearman_rho(&x, &y) - spearman_rho(&y, &x)).abs() < 1e-12);
    }

    #[test]
    fn membership_functions_cover_their_samples(
        samples in proptest::collection::vec(0.0..=1.0f64, 3..30)
    ) {
        let mfs = build_mfs(&samples).unwrap();
        prop_assert!(mfs.low.b <= mfs.moderate.b && mfs.moderate.b <= mfs.high.b);
        prop_assert!(mfs.low.a <= mfs.low.b && mfs.low.b <= mfs.low.c);
        prop_assert!(mfs.moderate.a <= mfs.moderate.b && mfs.moderate.b <= mfs.moderate.c);
        prop_assert!(mfs.high.a <= mfs.high.b && mfs.high.b <= mfs.high.c);
        for &s in &samples {
            let m = mfs.memberships(s);
            prop_assert!(m.iter().cloned().fold(0.0f64, f64::max) > 0.0, "no coverage at {}", s);
            prop_assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
