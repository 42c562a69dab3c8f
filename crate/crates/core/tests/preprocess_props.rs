mod common;

use proptest::prelude::*;
use qkad::preprocess::{
    fit_preprocessor, moving_average, nmf_fit, pca_fit, reduce, top_features, tree_importance,
    zscore_fit, PreprocessConfig, ReducerKind,
};
use qkad::Matrix;
use rand::Rng;

fn data(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = common::rng(seed);
    Matrix::from_fn(rows, cols, |_, c| (c as f64 + 1.0) * rng.random_range(-2.0..2.0) + c as f64)
}

fn labels(seed: u64, rows: usize) -> Vec<u8> {
    let mut rng = common::rng(seed ^ 0xabc);
    let mut y: Vec<u8> = (0..rows).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
    y[0] = 0;
    y[1] = 1;
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn moving_average_commutes_with_power_of_two_scaling(seed in any::<u64>(), w in 1usize..20, k in -6i32..=6) {
        let x = data(seed, 40, 3);
        let a = 2f64.powi(k);
        let lhs = moving_average(&x.map(|v| a * v), w).unwrap();
        let rhs = moving_average(&x, w).unwrap().map(|v| a * v);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn moving_average_commutes_with_any_scaling(seed in any::<u64>(), w in 1usize..20, a in -50.0..50.0f64) {
        let x = data(seed, 40, 3);
        let lhs = moving_average(&x.map(|v| a * v), w).unwrap();
        let rhs = moving_average(&x, w).unwrap().map(|v| a * v);
        prop_assert_eq!(lhs.rows(), 40 - w + 1);
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn zscore_standardizes_training_rows(seed in any::<u64>(), rows in 2usize..100) {
        let x = data(seed, rows, 4);
        let z = zscore_fit(&x).unwrap();
        let t = z.apply(&x).unwrap();
        for c in 0..4 {
            let col = t.column(c);
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-9);
            if !z.constant[c] {
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tree_importances_form_a_distribution(seed in any::<u64>(), rows in 10usize..120, cols in 1usize..6) {
        let x = data(seed, rows, cols);
        let imp = tree_importance(&x, &labels(seed, rows)).unwrap();
        prop_assert_eq!(imp.len(), cols);
        prop_assert!(imp.iter().all(|&v| v >= 0.0));
        prop_assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let top = top_features(&imp, cols);
        for pair in top.windows(2) {
            prop_assert!(imp[pair[0]] >= imp[pair[1]]);
        }
    }

    #[test]
    fn pca_components_are_orthonormal(seed in any::<u64>(), rows in 3usize..60, cols in 1usize..7) {
        let x = data(seed, rows, cols);
        let n = cols.min(rows - 1);
        let pca = pca_fit(&x, n).unwrap();
        let g = pca.components.matmul(&pca.components.transpose()).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g.get(i, j) - expect).abs() < 1e-10);
            }
        }
        for pair in pca.explained_variance.windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn nmf_objective_never_increases(seed in any::<u64>(), n in 1usize..4) {
        let x = data(seed, 30, 5);
        let nmf = nmf_fit(&x, n, 200, seed).unwrap();
        for pair in nmf.objective.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-12);
        }
        let w = nmf.apply(&x).unwrap();
        prop_assert!(w.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn transforms_do_not_mutate_the_fitted_state(seed in any::<u64>(), kind in prop::sample::select(vec![ReducerKind::Tree, ReducerKind::Pca, ReducerKind::Nmf])) {
        let train = data(seed, 40, 5);
        let calib = data(seed ^ 1, 30, 5);
        let y = labels(seed, 30);
        let cfg = PreprocessConfig { nmf_iters: 50, ..PreprocessConfig::new(kind, 3) };
        let fitted = fit_preprocessor(&train, Some((&calib, &y)), &cfg).unwrap();
        let test_a = data(seed ^ 2, 10, 5);
        let test_b = test_a.map(|v| 100.0 * v + 7.0);
        reduce(&test_a, &fitted).unwrap();
        reduce(&test_b, &fitted).unwrap();
        let again = fit_preprocessor(&train, Some((&calib, &y)), &cfg).unwrap();
        prop_assert_eq!(fitted, again);
    }
}

#[test]
fn tree_ranks_the_informative_feature_first() {
    let y = labels(5, 200);
    let mut rng = common::rng(9);
    let x = Matrix::from_fn(200, 4, |r, c| {
        let noise = rng.random_range(-1.0..1.0);
        if c == 2 {
            f64::from(y[r]) * 5.0 + noise
        } else {
            noise
        }
    });
    let imp = tree_importance(&x, &y).unwrap();
    assert_eq!(top_features(&imp, 1), vec![2]);
}

#[test]
fn tree_finds_the_shifted_synthetic_features() {
    use qkad::pipeline::{synth_generate, SynthSpec};
    use qkad::preprocess::LabelRule;
    let ds = synth_generate(&SynthSpec {
        shift: 6.0,
        affected_features: 3,
        shared_subset: true,
        stuck_probability: 0.0,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap()
    .windowed(60, LabelRule::Majority)
    .unwrap();
    let z = zscore_fit(&ds.matrix).unwrap().apply(&ds.matrix).unwrap();
    let imp = tree_importance(&z, &ds.labels).unwrap();

    // brute force: features where anomalous rows sit far outside the normal spread
    let normal: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == 0).collect();
    let anomalous: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == 1).collect();
    let mut far: Vec<(f64, usize)> = (0..ds.matrix.cols())
        .map(|f| {
            let vals: Vec<f64> = normal.iter().map(|&i| ds.matrix.get(i, f)).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            let outside = anomalous
                .iter()
                .filter(|&&i| ((ds.matrix.get(i, f) - mean) / sd).abs() > 3.0)
                .count();
            (outside as f64 / anomalous.len() as f64, f)
        })
        .collect();
    far.sort_by(|a, b| b.0.total_cmp(&a.0));
    let shifted: Vec<usize> = far[..3].iter().map(|&(_, f)| f).collect();
    assert!(far[2].0 > 0.5 && far[3].0 < 0.1, "{far:?}");

    // redundant shifted features add little once one of them has split the data
    assert!(shifted.contains(&top_features(&imp, 1)[0]), "{imp:?}");
    let mass: f64 = shifted.iter().map(|&f| imp[f]).sum();
    assert!(mass > 0.95, "{imp:?}");
}
