use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wam::baselines::*;

fn data(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| r[0] * 3.0 + r[1].sin() + rng.gen_range(-0.3..0.3))
        .collect();
    (x, y)
}

#[test]
fn unlimited_tree_memorizes_distinct_rows() {
    let (x, y) = data(300, 5, 1);
    let tree = Tree::fit::<ChaCha8Rng>(&x, &y, (0..300).collect(), &TreeParams::unlimited(), None);
    for (r, t) in x.iter().zip(&y) {
        assert_eq!(tree.predict(r), *t);
    }
}

#[test]
fn default_tree_respects_limits() {
    let (x, y) = data(500, 4, 2);
    let tree = Tree::fit::<ChaCha8Rng>(&x, &y, (0..500).collect(), &TreeParams::default(), None);
    assert!(tree.depth() <= 12);
    assert!(tree.leaves() <= 250);
}

#[test]
fn forest_is_the_mean_of_its_members() {
    let (x, y) = data(120, 9, 3);
    let forest = ForestRegressor {
        trees: 15,
        ..Default::default()
    }
    .fit_forest(&x, &y, 5)
    .unwrap();
    for r in x.iter().take(20) {
        let mean = forest.members.iter().map(|t| t.predict(r)).sum::<f64>() / 15.0;
        assert!((FittedModel::predict(&forest, r) - mean).abs() < 1e-9);
    }
}

#[test]
fn forest_is_deterministic_per_seed() {
    let (x, y) = data(100, 9, 4);
    let f = ForestRegressor {
        trees: 10,
        ..Default::default()
    };
    let a = f.fit(&x, &y, 11).unwrap();
    let b = f.fit(&x, &y, 11).unwrap();
    let c = f.fit(&x, &y, 12).unwrap();
    let probe = &x[7];
    assert_eq!(a.predict(probe), b.predict(probe));
    let differs = x.iter().any(|r| a.predict(r) != c.predict(r));
    assert!(differs);
}

#[test]
fn boosting_loss_never_increases() {
    let (x, y) = data(200, 6, 5);
    let (_, history) = GBoostRegressor::default().fit_boosted(&x, &y).unwrap();
    assert_eq!(history.len(), 201);
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} then {}", w[0], w[1]);
    }
    assert!(history[200] < history[0] * 0.2);
}

#[test]
fn constant_target_gives_constant_model() {
    let (x, _) = data(40, 3, 6);
    let y = vec![2.5; 40];
    for r in BaselineRegistry::default().iter() {
        let m = r.fit(&x, &y, 0).unwrap();
        assert!(x.iter().all(|row| (m.predict(row) - 2.5).abs() < 1e-12), "{}", r.name());
    }
}

#[test]
fn single_sample_is_rejected() {
    let x = vec![vec![1.0; 27]];
    let y = [[1.0; 6]];
    assert!(MultiOutput::fit(&AverageRegressor, &x, &y, 0).is_err());
}

#[test]
fn permuting_labels_permutes_models() {
    let (x, y0) = data(80, 5, 7);
    let y: Vec<[f64; 6]> = y0
        .iter()
        .enumerate()
        .map(|(i, &v)| [v, v * 2.0, -v, (i % 7) as f64, v * v, 1.0 + v])
        .collect();
    let perm = [3, 0, 5, 1, 4, 2];
    let yp: Vec<[f64; 6]> = y.iter().map(|r| std::array::from_fn(|l| r[perm[l]])).collect();
    let tree = TreeRegressor::default();
    let a = MultiOutput::fit(&tree, &x, &y, 1).unwrap();
    let b = MultiOutput::fit(&tree, &x, &yp, 1).unwrap();
    for r in &x {
        let (pa, pb) = (a.predict(r), b.predict(r));
        for l in 0..6 {
            assert_eq!(pb[l], pa[perm[l]]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn tree_is_piecewise_constant(seed in 0u64..1000, probes in proptest::collection::vec(proptest::collection::vec(-1.5f64..1.5, 4), 50)) {
        let (x, y) = data(60, 4, seed);
        let tree = Tree::fit::<ChaCha8Rng>(&x, &y, (0..60).collect(), &TreeParams::default(), None);
        let mut seen: Vec<f64> = probes.iter().chain(&x).map(|p| tree.predict(p)).collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        prop_assert!(seen.len() <= tree.leaves());
    }
}
