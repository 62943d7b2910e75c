use super::*;
use crate::data::Dataset;

fn blob_2class(n_per: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for class in 0..2usize {
        let center = class as f64 * sep;
        for _ in 0..n_per {
            x.push(vec![
                center + rng.gen_range(-0.5..0.5),
                center + rng.gen_range(-0.5..0.5),
            ]);
            y.push(class);
        }
    }
    (x, y)
}

fn spec(family: ModelFamily) -> ModelSpec {
    family.default_spec()
}

#[test]
fn separable_blob_all_families() {
    // centers 4 sigma apart: every family should fit it essentially perfectly
    let (x, y) = blob_2class(40, 4.0, 3);
    for family in ModelFamily::ALL {
        let m = train(&spec(family), &x, &y, 7).unwrap();
        let (acc, _) = evaluate(&m, &x, &y).unwrap();
        assert!(acc >= 0.99, "{family}: accuracy {acc}");
    }
}

#[test]
fn single_class_rejected() {
    let x = vec![vec![0.0], vec![1.0]];
    let y = vec![0, 0];
    for family in ModelFamily::ALL {
        assert!(matches!(
            train(&spec(family), &x, &y, 0),
            Err(ModelError::ClassCountTooLow)
        ));
    }
}

#[test]
fn train_is_deterministic() {
    let (x, y) = blob_2class(25, 2.0, 5);
    let probe = vec![vec![0.3, 0.1], vec![1.5, 1.9], vec![1.0, 1.0]];
    for family in ModelFamily::ALL {
        let a = train(&spec(family), &x, &y, 42).unwrap();
        let b = train(&spec(family), &x, &y, 42).unwrap();
        assert_eq!(
            a.predict_proba(&probe).unwrap(),
            b.predict_proba(&probe).unwrap(),
            "{family}"
        );
    }
}

#[test]
fn predict_proba_rows_normalized() {
    let (x, y) = blob_2class(20, 1.0, 11);
    for family in ModelFamily::ALL {
        let m = train(&spec(family), &x, &y, 1).unwrap();
        for row in m.predict_proba(&x).unwrap() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "{family}: row sum {sum}");
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn predict_shape_mismatch() {
    let (x, y) = blob_2class(10, 2.0, 0);
    let m = train(&spec(ModelFamily::LogisticRegression), &x, &y, 0).unwrap();
    assert!(matches!(
        m.predict_proba(&[vec![1.0, 2.0, 3.0]]),
        Err(ModelError::ShapeMismatch(_))
    ));
}

#[test]
fn zero_weight_logistic_is_uniform() {
    let m = TrainedClassifier {
        spec: spec(ModelFamily::LogisticRegression),
        n_features: 2,
        n_classes: 4,
        state: FittedState::Logistic(LogisticModel {
            weights: vec![vec![0.0; 2]; 4],
            bias: vec![0.0; 4],
            train_losses: vec![],
        }),
    };
    let p = m.predict_proba(&[vec![0.7, -3.0]]).unwrap();
    for &v in &p[0] {
        assert!((v - 0.25).abs() < 1e-12);
    }
}

#[test]
fn logistic_loss_non_increasing() {
    let (x, y) = blob_2class(30, 1.5, 9);
    let mut params = ParamMap::new();
    params.insert("lr".into(), ParamValue::Float(0.1));
    params.insert("epochs".into(), ParamValue::Int(300));
    let m = train(
        &ModelSpec {
            family: ModelFamily::LogisticRegression,
            params,
        },
        &x,
        &y,
        0,
    )
    .unwrap();
    let FittedState::Logistic(lm) = &m.state else {
        panic!()
    };
    for w in lm.train_losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "loss increased: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn stump_leaf_probs_match_class_frequencies() {
    // best gini split is at 0.25: left leaf {0,0} pure, right leaf {1,0,1}
    let x = vec![vec![0.1], vec![0.2], vec![0.3], vec![0.4], vec![0.9]];
    let y = vec![0, 0, 1, 0, 1];
    let mut params = ParamMap::new();
    params.insert("trees".into(), ParamValue::Int(1));
    params.insert("bootstrap".into(), ParamValue::Bool(false));
    params.insert("max_depth".into(), ParamValue::Int(1));
    let m = train(
        &ModelSpec {
            family: ModelFamily::RandomForest,
            params,
        },
        &x,
        &y,
        0,
    )
    .unwrap();
    let p = m.predict_proba(&[vec![0.5]]).unwrap();
    assert!((p[0][0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((p[0][1] - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn forest_one_tree_no_bootstrap_equals_single_tree() {
    let (x, y) = blob_2class(25, 1.0, 13);
    let mut params = ParamMap::new();
    params.insert("trees".into(), ParamValue::Int(1));
    params.insert("bootstrap".into(), ParamValue::Bool(false));
    let forest = train(
        &ModelSpec {
            family: ModelFamily::RandomForest,
            params,
        },
        &x,
        &y,
        0,
    )
    .unwrap();
    let rows: Vec<usize> = (0..x.len()).collect();
    let single = tree::fit_tree(&x, &y, &rows, 2, 1, SplitCriterion::Gini, usize::MAX);
    let fp = forest.predict_proba(&x).unwrap();
    for (row, probs) in x.iter().zip(fp) {
        assert_eq!(single.leaf_probs(row), probs.as_slice());
    }
}

#[test]
fn smo_respects_dual_constraints() {
    let (x, y) = blob_2class(30, 2.0, 17);
    let c_reg = 1.0;
    let m = svm::fit_ovr(&x, &y, 2, c_reg, 0.5, 5);
    for machine in &m.machines {
        assert!(machine.constraint_residual <= 1e-6);
        for &a in &machine.alpha {
            assert!(a >= 0.0 && a <= c_reg + 1e-12, "alpha {a}");
        }
    }
}

#[test]
fn evaluate_hand_computed() {
    let m = TrainedClassifier {
        spec: spec(ModelFamily::LogisticRegression),
        n_features: 1,
        n_classes: 2,
        state: FittedState::Logistic(LogisticModel {
            weights: vec![vec![0.0], vec![10.0]],
            bias: vec![0.0, -5.0],
            train_losses: vec![],
        }),
    };
    // model predicts 1 iff x > 0.5
    let x = vec![vec![0.9], vec![0.1], vec![0.2], vec![0.3]];
    let truth = vec![1, 1, 0, 0];
    let (acc, f1) = evaluate(&m, &x, &truth).unwrap();
    assert!((acc - 0.75).abs() < 1e-12);
    assert!((f1 - (2.0 / 3.0 + 4.0 / 5.0) / 2.0).abs() < 1e-12);
}

#[test]
fn evaluate_degenerate_cases() {
    let (acc, f1) = accuracy_macro_f1(&[0, 1, 0], &[0, 1, 0], 2);
    assert_eq!((acc, f1), (1.0, 1.0));
    let (acc, f1) = accuracy_macro_f1(&[1, 0], &[0, 1], 2);
    assert_eq!((acc, f1), (0.0, 0.0));
}

fn blob_dataset(n_per: usize, sep: f64, seed: u64) -> Dataset {
    let (x, y) = blob_2class(n_per, sep, seed);
    Dataset {
        feature_names: vec!["f0".into(), "f1".into()],
        x,
        y,
        class_names: vec!["a".into(), "b".into()],
    }
}

#[test]
fn grid_single_point_uses_those_params() {
    let ds = blob_dataset(20, 3.0, 2);
    let mut grid = Grid::new();
    grid.insert("lr".into(), vec![ParamValue::Float(0.05)]);
    grid.insert("epochs".into(), vec![ParamValue::Int(123)]);
    let (model, report) =
        grid_search(ModelFamily::LogisticRegression, &grid, &ds, 4, 0).unwrap();
    assert_eq!(model.spec.params, report.best_params);
    assert_eq!(report.best_params["epochs"], ParamValue::Int(123));
    assert_eq!(report.evaluated.len(), 1);
}

#[test]
fn grid_picks_stronger_point() {
    let ds = blob_dataset(30, 3.0, 4);
    let mut grid = Grid::new();
    grid.insert("trees".into(), vec![ParamValue::Int(1), ParamValue::Int(30)]);
    grid.insert("max_depth".into(), vec![ParamValue::Int(1), ParamValue::Int(12)]);
    let (_, report) = grid_search(ModelFamily::RandomForest, &grid, &ds, 3, 0).unwrap();
    // winner's CV accuracy dominates every evaluated point
    for point in &report.evaluated {
        assert!(report.mean_accuracy >= point.mean_accuracy);
    }
    assert_eq!(report.fold_accuracy.len(), 3);
    let want: f64 = report.fold_accuracy.iter().sum::<f64>() / 3.0;
    assert!((report.mean_accuracy - want).abs() < 1e-12);
}

#[test]
fn grid_empty_rejected() {
    let ds = blob_dataset(10, 3.0, 4);
    assert!(matches!(
        grid_search(ModelFamily::SvmRbf, &Grid::new(), &ds, 2, 0),
        Err(ModelError::EmptyGrid)
    ));
}

#[test]
fn unknown_hyperparameter_rejected() {
    let (x, y) = blob_2class(10, 3.0, 0);
    let mut params = ParamMap::new();
    params.insert("frobnicate".into(), ParamValue::Int(3));
    assert!(matches!(
        train(
            &ModelSpec {
                family: ModelFamily::SvmRbf,
                params
            },
            &x,
            &y,
            0
        ),
        Err(ModelError::BadHyperparameter(_))
    ));
}

#[test]
fn model_persistence_round_trip() {
    let (x, y) = blob_2class(15, 2.0, 21);
    let probe = vec![vec![0.5, 0.5], vec![1.8, 1.6]];
    let dir = tempfile::tempdir().unwrap();
    for family in ModelFamily::ALL {
        let m = train(&spec(family), &x, &y, 3).unwrap();
        let path = dir.path().join(format!("{family}.json"));
        m.save_json(&path).unwrap();
        let loaded = TrainedClassifier::load_json(&path).unwrap();
        assert_eq!(
            m.predict_proba(&probe).unwrap(),
            loaded.predict_proba(&probe).unwrap(),
            "{family}"
        );
    }
}
