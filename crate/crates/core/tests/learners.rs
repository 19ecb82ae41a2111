mod common;

use povml::learners::{
    gaussian_density, Classifier, DecisionTree, ForestParams, GbtParams, GradientBoosting, Knn, KnnParams, NaiveBayes,
    NbParams, RandomForest, TreeParams,
};
use povml::{Matrix, ModelSpec};
use proptest::prelude::*;

fn specs() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Tree(TreeParams::default()),
        ModelSpec::Forest(ForestParams {
            n_trees: 15,
            ..Default::default()
        }),
        ModelSpec::Gbt(GbtParams {
            iterations: 10,
            ..Default::default()
        }),
        ModelSpec::Nb(NbParams::default()),
        ModelSpec::Knn(KnnParams { k: 3 }),
    ]
}

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u32>)> {
    (4usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(
                prop::collection::vec(prop::sample::select(vec![0.0, 1.0, 2.5, -3.0, 7.0]), 3),
                n,
            ),
            prop::collection::vec(prop::sample::select(vec![1u32, 2, 4]), n)
                .prop_filter("two classes", |y| y.iter().any(|&c| c != y[0])),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_learner_returns_distributions_over_seen_classes((rows, labels) in dataset()) {
        let x = Matrix::from_rows(&rows).unwrap();
        let probe = Matrix::from_rows(&[[0.0, 0.0, 0.0], [100.0, -100.0, 3.3]]).unwrap();
        let mut classes = labels.clone();
        classes.sort_unstable();
        classes.dedup();
        for spec in specs() {
            let m = spec.fit(&x, &labels, None, &[0], 3).unwrap();
            prop_assert_eq!(m.classes(), classes.as_slice());
            for p in m.predict_proba(&probe).iter().chain(&m.predict_proba(&x)) {
                prop_assert_eq!(p.len(), classes.len());
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{} sums to {}", spec.name(), p.iter().sum::<f64>());
                prop_assert!(p.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
            }
            let pred = m.predict(&probe);
            prop_assert_eq!(pred.len(), 2);
            prop_assert!(pred.iter().all(|c| classes.contains(c)));
        }
    }

    #[test]
    fn uniform_weights_of_any_scale_match_unweighted((rows, labels) in dataset(), scale in prop::sample::select(vec![0.5, 2.0, 13.0])) {
        let x = Matrix::from_rows(&rows).unwrap();
        let w = vec![scale; labels.len()];
        for spec in specs() {
            let plain = spec.fit(&x, &labels, None, &[0], 5).unwrap();
            let weighted = spec.fit(&x, &labels, Some(&w), &[0], 5).unwrap();
            for (a, b) in plain.predict_proba(&x).iter().zip(&weighted.predict_proba(&x)) {
                for (u, v) in a.iter().zip(b) {
                    prop_assert!((u - v).abs() < 1e-9, "{}: {} vs {}", spec.name(), u, v);
                }
            }
        }
    }

    #[test]
    fn duplicating_rows_equals_doubling_their_weight((rows, labels) in dataset(), pick in 0usize..1000) {
        let i = pick % rows.len();
        let x = Matrix::from_rows(&rows).unwrap();
        let mut w = vec![1.0; rows.len()];
        w[i] = 2.0;
        let mut dup_rows = rows.clone();
        dup_rows.push(rows[i].clone());
        let mut dup_labels = labels.clone();
        dup_labels.push(labels[i]);
        let xd = Matrix::from_rows(&dup_rows).unwrap();
        let probe = Matrix::from_rows(&[[0.0, 1.0, 2.5], [7.0, -3.0, 0.0]]).unwrap();

        let a = DecisionTree::fit(&x, &labels, Some(&w), &TreeParams::default()).unwrap();
        let b = DecisionTree::fit(&xd, &dup_labels, None, &TreeParams::default()).unwrap();
        let (pa, pb) = (a.predict_proba(&probe), b.predict_proba(&probe));
        for (ra, rb) in pa.iter().zip(&pb) {
            for (u, v) in ra.iter().zip(rb) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn knn_neighbours_match_sorted_distances((rows, labels) in dataset(), k in 1usize..4, q in prop::collection::vec(-5.0f64..8.0, 3)) {
        let x = Matrix::from_rows(&rows).unwrap();
        let k = k.min(rows.len());
        let m = Knn::fit(&x, &labels, None, &KnnParams { k }).unwrap();
        let mut oracle: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<usize> = oracle.iter().take(k).map(|p| p.1).collect();
        prop_assert_eq!(m.neighbors(&q), expected);
    }
}

#[test]
fn forest_probability_is_the_mean_of_its_trees() {
    let table = common::survey_table(300, 2);
    let enc = povml::wrangle::apply_plan(&table, &povml::wrangle::build_default_plan()).unwrap();
    let x = &enc.matrix.values;
    let y = &enc.matrix.labels;
    let f = RandomForest::fit(
        x,
        y,
        None,
        &ForestParams {
            n_trees: 12,
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let forest = f.predict_proba(x);
    let per_tree: Vec<Vec<Vec<f64>>> = f.trees.iter().map(|t| t.predict_proba(x)).collect();
    for (i, row) in forest.iter().enumerate() {
        for c in 0..row.len() {
            let manual = per_tree.iter().map(|t| t[i][c]).sum::<f64>() / per_tree.len() as f64;
            assert!((row[c] - manual).abs() < 1e-12);
        }
    }
    assert_eq!(f.trees.len(), 12);
    assert_eq!(
        f.features_per_split,
        (enc.matrix.n_features() as f64).sqrt().floor() as usize
    );
    let distinct: std::collections::BTreeSet<_> = f.tree_seeds.iter().collect();
    assert_eq!(distinct.len(), 12);
}

#[test]
fn forest_is_more_stable_than_a_single_tree_across_resamples() {
    // Spread of held-out accuracy over seeds: bagging should not widen it.
    let table = common::survey_table(600, 8);
    let enc = povml::wrangle::apply_plan(&table, &povml::wrangle::build_default_plan()).unwrap();
    let m = &enc.matrix;
    let spread = |accs: &[f64]| {
        let mu = accs.iter().sum::<f64>() / accs.len() as f64;
        accs.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / accs.len() as f64
    };
    let mut tree_acc = Vec::new();
    let mut forest_acc = Vec::new();
    for seed in 0..6 {
        let s = povml::eval::split_80_20(&m.labels, seed, true).unwrap();
        let train = m.select_rows(&s.train_rows);
        let test = m.select_rows(&s.test_rows);
        let acc = |pred: Vec<u32>| {
            pred.iter().zip(&test.labels).filter(|(a, b)| a == b).count() as f64 / test.labels.len() as f64
        };
        let params = ForestParams {
            n_trees: 1,
            seed,
            ..Default::default()
        };
        tree_acc.push(acc(RandomForest::fit(&train.values, &train.labels, None, &params)
            .unwrap()
            .predict(&test.values)));
        let params = ForestParams {
            n_trees: 60,
            seed,
            ..Default::default()
        };
        forest_acc.push(acc(RandomForest::fit(&train.values, &train.labels, None, &params)
            .unwrap()
            .predict(&test.values)));
    }
    assert!(
        spread(&forest_acc) <= spread(&tree_acc) + 1e-4,
        "{forest_acc:?} vs {tree_acc:?}"
    );
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&forest_acc) >= mean(&tree_acc));
}

#[test]
fn boosting_first_stage_matches_hand_computation() {
    let x = Matrix::from_rows(&[[0.0], [0.0], [1.0], [1.0]]).unwrap();
    let y = [1, 1, 2, 2];
    let params = GbtParams {
        iterations: 1,
        learning_rate: 0.1,
        max_depth: 1,
        ..Default::default()
    };
    let m = GradientBoosting::fit(&x, &y, None, &params).unwrap();
    let half = 0.5f64.ln();
    assert_eq!(m.initial_scores, vec![half, half]);
    // Residuals are +-0.5; the Newton leaf is (K-1)/K * sum r / sum |r|(1-|r|) = +-1.
    let left = m.decision_function(&[0.0], 1);
    let right = m.decision_function(&[1.0], 1);
    for (got, want) in left.iter().zip([half + 0.1, half - 0.1]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    for (got, want) in right.iter().zip([half - 0.1, half + 0.1]) {
        assert!((got - want).abs() < 1e-12);
    }
    let p = m.predict_proba(&Matrix::from_rows(&[[0.0]]).unwrap());
    assert!((p[0][0] - 1.0 / (1.0 + (-0.2f64).exp())).abs() < 1e-12);
    assert!(m.train_loss[0] < 2.0f64.ln());
}

#[test]
fn naive_bayes_matches_hand_posterior() {
    // Feature 0 categorical, feature 1 Gaussian.
    let x = Matrix::from_rows(&[[0.0, 1.0], [0.0, 3.0], [1.0, 2.0], [1.0, 6.0], [1.0, 8.0]]).unwrap();
    let y = [1, 1, 2, 2, 2];
    let m = NaiveBayes::fit(&x, &y, None, &[0], &NbParams::default()).unwrap();
    let query = [0.0, 4.0];
    // Class 1: prior 2/5, P(f0=0)=(2+1)/(2+2), mean 2, var 1.
    let c1 = 0.4 * (3.0 / 4.0) * gaussian_density(4.0, 2.0, 1.0);
    // Class 2: prior 3/5, P(f0=0)=(0+1)/(3+2), mean 16/3, population variance.
    let mu: f64 = 16.0 / 3.0;
    let var = [2.0, 6.0, 8.0].iter().map(|v: &f64| (v - mu).powi(2)).sum::<f64>() / 3.0;
    let c2 = 0.6 * (1.0 / 5.0) * gaussian_density(4.0, mu, var);
    let p = m.predict_proba(&Matrix::from_rows(&[query]).unwrap());
    assert!(
        (p[0][0] - c1 / (c1 + c2)).abs() < 1e-9,
        "{:?} vs {}",
        p[0],
        c1 / (c1 + c2)
    );
}

#[test]
fn fitting_rejects_bad_input() {
    let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    assert!(GradientBoosting::fit(&x, &[1, 1], None, &GbtParams::default()).is_err());
    assert!(Knn::fit(&x, &[1, 2], None, &KnnParams { k: 3 }).is_err());
    assert!(DecisionTree::fit(&x, &[1], None, &TreeParams::default()).is_err());
    assert!(DecisionTree::fit(&x, &[1, 2], Some(&[1.0, -1.0]), &TreeParams::default()).is_err());
}
