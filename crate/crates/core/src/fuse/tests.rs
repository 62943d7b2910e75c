use super::*;

// Feature order: sepal length, sepal width, petal length, petal width.
// One source per (technique, model) pair; nine in total.
fn nine_sources() -> Vec<Vec<f64>> {
    vec![
        // permutation importance: nn, rf, svm
        vec![0.07, 0.00, 1.00, 0.52],
        vec![0.02, 0.00, 0.45, 1.00],
        vec![0.00, 0.08, 0.91, 1.00],
        // shap: nn, rf, svm
        vec![0.20, 0.00, 1.00, 0.37],
        vec![0.12, 0.00, 0.84, 1.00],
        vec![0.00, 0.01, 1.00, 0.90],
        // lime: nn, rf, svm
        vec![1.00, 0.56, 0.46, 0.00],
        vec![0.11, 0.36, 1.00, 0.00],
        vec![0.58, 0.72, 0.00, 1.00],
    ]
}

fn nn_slice() -> Vec<Vec<f64>> {
    vec![
        vec![0.07, 0.00, 1.00, 0.52],
        vec![0.20, 0.00, 1.00, 0.37],
        vec![1.00, 0.56, 0.46, 0.00],
    ]
}

const TOL: f64 = 0.005 + 1e-12;

#[test]
fn mean_reproduces_reference_column() {
    let fused = fuse_mean(&nine_sources()).unwrap();
    let expected = [0.23, 0.19, 0.74, 0.64];
    for (got, want) in fused.iter().zip(expected) {
        assert!((got - want).abs() <= TOL, "{got} vs {want}");
    }
}

#[test]
fn median_reproduces_reference_column() {
    let fused = fuse_median(&nine_sources()).unwrap();
    let expected = [0.11, 0.01, 0.91, 0.90];
    for (got, want) in fused.iter().zip(expected) {
        assert!((got - want).abs() <= TOL, "{got} vs {want}");
    }
}

#[test]
fn median_even_count_averages() {
    let fused = fuse_median(&[vec![0.2], vec![0.4]]).unwrap();
    assert!((fused[0] - 0.3).abs() < 1e-12);
}

#[test]
fn tau_test_single_rejection_then_mean() {
    // petal length column {1.00,0.45,0.91,1.00,0.84,1.00,0.46,1.00,0.00}:
    // iteration 1 rejects 0.00 (deviation 0.74 > tau*s ~ 0.63), iteration 2
    // rejects nothing, mean of survivors = 6.66/8 = 0.8325
    let pl: Vec<f64> = nine_sources().iter().map(|s| s[2]).collect();
    assert_eq!(tau_test_rejections(&pl, 0.05), 1);
    let fused = fuse_tau_test(&nine_sources(), 0.05).unwrap();
    assert!((fused[2] - 0.83).abs() <= 0.01, "{}", fused[2]);
    assert!((fused[2] - 0.8325).abs() < 1e-9);
}

#[test]
fn tau_test_degenerate_cases() {
    let fused = fuse_tau_test(&[vec![0.4], vec![0.4], vec![0.4]], 0.05).unwrap();
    assert!((fused[0] - 0.4).abs() < 1e-12);
    assert_eq!(tau_test_rejections(&[0.4, 0.4, 0.4], 0.05), 0);
    // m = 2 in the per-feature loop: plain mean
    assert_eq!(tau_test_rejections(&[0.1, 0.9], 0.05), 0);
}

#[test]
fn box_whiskers_reference_and_identity_with_mean() {
    let sources = nine_sources();
    let fused = fuse_box_whiskers(&sources).unwrap();
    assert!((fused[2] - 0.74).abs() <= 0.01, "{}", fused[2]);

    // whiskers contain every point -> exactly the mean
    let tight = vec![vec![0.4, 0.5], vec![0.5, 0.6], vec![0.6, 0.7]];
    assert_eq!(
        fuse_box_whiskers(&tight).unwrap(),
        fuse_mean(&tight).unwrap()
    );
}

#[test]
fn box_whiskers_zero_iqr_drops_outlier() {
    // {0.5 x 9, 1.0}: Q1 = Q3 = 0.5, IQR 0, whiskers collapse to [0.5, 0.5]
    let mut sources = vec![vec![0.5]; 9];
    sources.push(vec![1.0]);
    let fused = fuse_box_whiskers(&sources).unwrap();
    assert_eq!(fused, vec![0.5]);
}

#[test]
fn mode_kde_cases() {
    let point_mass = fuse_mode_kde(&[vec![0.5], vec![0.5], vec![0.5]]).unwrap();
    assert!((point_mass[0] - 0.5).abs() < 0.002); // grid resolution

    let skewed = fuse_mode_kde(&[vec![0.1], vec![0.1], vec![0.1], vec![0.1], vec![0.9]]).unwrap();
    assert!((skewed[0] - 0.1).abs() < 0.05, "{}", skewed[0]);

    // fine-grid oracle: the coarse-grid argmax sits at the density maximum
    let col = [0.1, 0.1, 0.1, 0.1, 0.9];
    let h: f64 = 1e-3f64.max(
        0.9 * crate::stats::sample_std(&col)
            .min((crate::stats::quantile(&col, 0.75) - crate::stats::quantile(&col, 0.25)) / 1.34)
            * (5f64).powf(-0.2),
    );
    let density = |x: f64| -> f64 {
        col.iter()
            .map(|&v| (-0.5 * ((x - v) / h) * ((x - v) / h)).exp())
            .sum()
    };
    let mut best = 0.0;
    let mut best_d = f64::NEG_INFINITY;
    for i in 0..4096 {
        let x = i as f64 / 4095.0;
        let dv = density(x);
        if dv > best_d {
            best_d = dv;
            best = x;
        }
    }
    assert!((skewed[0] - best).abs() < 0.01, "{} vs fine {best}", skewed[0]);

    // symmetric bimodal: the mode lands on one of the two bumps (the wide
    // bandwidth pulls the peaks slightly inward)
    let bimodal = fuse_mode_kde(&[vec![0.2],
        vec![0.2],
        vec![0.2],
        vec![0.2],
        vec![0.8],
        vec![0.8],
        vec![0.8],
        vec![0.8]])
    .unwrap();
    let nearest = (bimodal[0] - 0.2).abs().min((bimodal[0] - 0.8).abs());
    assert!(nearest < 0.05, "{}", bimodal[0]);
}

#[test]
fn majority_vote_reproduces_model_specific_reference() {
    let fused = fuse_majority_vote(&nn_slice(), 1.0).unwrap();
    let expected = [0.135, 0.0, 1.0, 0.445];
    for (got, want) in fused.iter().zip(expected) {
        assert!((got - want).abs() <= TOL, "{got} vs {want}");
    }
}

#[test]
fn majority_vote_identical_sources() {
    let v = vec![0.3, 0.9, 0.1];
    let fused = fuse_majority_vote(&[v.clone(), v.clone(), v.clone()], 1.0).unwrap();
    for (got, want) in fused.iter().zip(&v) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn majority_vote_truncated_ranking() {
    // num_features = 0.5 with d = 4 considers only the top 2 ranks;
    // everything else collapses to rank d + 1
    let sources = vec![
        vec![0.9, 0.7, 0.2, 0.1],
        vec![0.8, 0.6, 0.1, 0.3],
        vec![0.7, 0.9, 0.3, 0.2],
    ];
    let fused = fuse_majority_vote(&sources, 0.5).unwrap();
    // features 2 and 3 always fall outside the top 2: modal rank 5 across all
    assert!((fused[2] - (0.2 + 0.1 + 0.3) / 3.0).abs() < 1e-12);
    assert!((fused[3] - (0.1 + 0.3 + 0.2) / 3.0).abs() < 1e-12);
}

#[test]
fn rate_discards_reversed_source() {
    let base: Vec<f64> = vec![0.9, 0.8, 0.7, 0.6, 0.4, 0.3, 0.2, 0.1];
    let reversed: Vec<f64> = base.iter().rev().copied().collect();
    let sources = vec![
        base.clone(),
        base.clone(),
        base.clone(),
        base.clone(),
        reversed,
    ];
    for corr in [RankCorrelation::Kendall, RankCorrelation::Spearman] {
        let fused = fuse_rate(&sources, corr, 0.05, 1.0).unwrap();
        // survivors are the four identical sources: result is their vector
        assert_eq!(fused, base, "{corr:?}");
    }
}

#[test]
fn rate_identical_sources_pass_through() {
    let v: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
    let sources = vec![v.clone(), v.clone(), v.clone(), v.clone()];
    assert_eq!(fuse_rate(&sources, RankCorrelation::Kendall, 0.05, 1.0).unwrap(), v);
}

#[test]
fn rate_noise_falls_through_to_majority_vote() {
    use rand::{Rng, SeedableRng};
    let d = 8;
    let mut checked = 0;
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sources: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        // premise check with the public statistics: no source is
        // significantly positively correlated with the others' mean
        let mut any_significant = false;
        for i in 0..3 {
            let consensus: Vec<f64> = (0..d)
                .map(|j| {
                    (0..3)
                        .filter(|&k| k != i)
                        .map(|k| sources[k][j])
                        .sum::<f64>()
                        / 2.0
                })
                .collect();
            let r = kendall_tau(&sources[i], &consensus);
            if r > 0.0 && kendall_tau_p_value(&sources[i], &consensus) < 0.05 {
                any_significant = true;
            }
        }
        if any_significant {
            continue;
        }
        checked += 1;
        let fused = fuse_rate(&sources, RankCorrelation::Kendall, 0.05, 1.0).unwrap();
        let plain = fuse_majority_vote(&sources, 1.0).unwrap();
        assert_eq!(fused, plain, "seed {seed}");
    }
    assert!(checked >= 10, "premise held on only {checked}/20 seeds");
}

#[test]
fn fusion_is_permutation_invariant_in_source_order() {
    let sources = nine_sources();
    let mut shuffled = sources.clone();
    shuffled.reverse();
    shuffled.swap(1, 4);
    let params = FuseParams::default();
    let names: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
    let a = fuse_methods(&names, &sources, &FusionMethod::ALL, &params).unwrap();
    let b = fuse_methods(&names, &shuffled, &FusionMethod::ALL, &params).unwrap();
    for method in FusionMethod::ALL {
        let (x, y) = (&a.methods[&method], &b.methods[&method]);
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() < 1e-12, "{method}: {u} vs {v}");
        }
    }
}

#[test]
fn location_methods_stay_within_source_range() {
    let sources = nine_sources();
    let params = FuseParams::default();
    let candidates = [
        fuse_mean(&sources).unwrap(),
        fuse_median(&sources).unwrap(),
        fuse_box_whiskers(&sources).unwrap(),
        fuse_tau_test(&sources, params.alpha).unwrap(),
    ];
    for j in 0..4 {
        let col: Vec<f64> = sources.iter().map(|s| s[j]).collect();
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for fused in &candidates {
            assert!(fused[j] >= lo - 1e-12 && fused[j] <= hi + 1e-12);
        }
    }
}

#[test]
fn insufficient_sources_rejected() {
    assert!(matches!(
        fuse_mean(&[vec![1.0]]),
        Err(FuseError::InsufficientSources { .. })
    ));
    assert!(matches!(
        fuse_tau_test(&[vec![1.0], vec![2.0]], 0.05),
        Err(FuseError::InsufficientSources { .. })
    ));
    assert!(matches!(
        fuse_rate(&[vec![1.0], vec![2.0]], RankCorrelation::Kendall, 0.05, 1.0),
        Err(FuseError::InsufficientSources { .. })
    ));
    assert!(matches!(
        fuse_mean(&[vec![1.0, 2.0], vec![1.0]]),
        Err(FuseError::LengthMismatch(2, 1))
    ));
}

#[test]
fn fused_csv_format() {
    let names = vec!["pl".to_string(), "sw".to_string()];
    let fused = fuse_methods(
        &names,
        &[vec![0.2, 0.4], vec![0.6, 0.8]],
        &[FusionMethod::Mean, FusionMethod::Median],
        &FuseParams::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    fused.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text,
        "feature,mean,median\npl,0.4000,0.4000\nsw,0.6000,0.6000\n"
    );
}
