mod support;

use cellmine_core::ml::{fit_cart, fit_gbm, staged_raw_scores, Dataset, GbmParams, Task, TreeParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::cart_oracle::{oracle_tree, same_tree};

fn random_case(seed: u64, task: Task) -> (Vec<Vec<f64>>, Vec<f64>, TreeParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=20);
    let d = rng.random_range(1..=4);
    let discrete = rng.random_bool(0.5);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if discrete { f64::from(rng.random_range(0..4u8)) } else { rng.random_range(-5.0..5.0) })
                .collect()
        })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|_| match task {
            Task::Regression => rng.random_range(0.0..100.0f64).round() / 4.0,
            Task::Classification => f64::from(u8::from(rng.random_bool(0.5))),
        })
        .collect();
    let p = TreeParams {
        max_depth: rng.random_range(1..=5),
        min_samples_split: rng.random_range(2..=4),
        min_samples_leaf: rng.random_range(1..=3),
    };
    (x, y, p)
}

#[test]
fn cart_matches_brute_force_oracle() {
    for task in [Task::Regression, Task::Classification] {
        for seed in 0..100 {
            let (x, y, p) = random_case(seed, task);
            let tree = fit_cart(&x, &y, task, &p);
            let oracle = oracle_tree(&x, &y, task, &p, 0);
            same_tree(&tree, 0, &oracle).unwrap_or_else(|e| panic!("{task:?} seed {seed}: {e}"));
        }
    }
}

fn regression_fixture(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 80;
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let y = x.iter().map(|r| 10.0 * r[0] * r[1] + 4.0 * (6.0 * r[2]).sin() + rng.random_range(-0.5..0.5)).collect();
    Dataset::new(x, y, (0..n).map(|i| i.to_string()).collect(), Task::Regression).unwrap()
}

#[test]
fn gbm_training_mse_never_increases() {
    for seed in 0..10 {
        let ds = regression_fixture(seed);
        let m = fit_gbm(&ds, &GbmParams { n_trees: 100, ..Default::default() }, seed).unwrap();
        let mse: Vec<f64> = staged_raw_scores(&m, &ds.x)
            .unwrap()
            .iter()
            .map(|f| f.iter().zip(&ds.y).map(|(f, y)| (f - y).powi(2)).sum::<f64>() / ds.len() as f64)
            .collect();
        for (round, w) in mse.windows(2).enumerate() {
            assert!(w[1] <= w[0], "seed {seed} round {round}: {} > {}", w[1], w[0]);
        }
    }
}

proptest! {
    #[test]
    fn predictions_stay_in_target_envelope(seed in 0u64..1000, rate in 0.05f64..=1.0) {
        let ds = regression_fixture(seed);
        let m = fit_gbm(&ds, &GbmParams { n_trees: 20, learning_rate: rate, ..Default::default() }, 0).unwrap();
        let lo = ds.y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ds.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let p = cellmine_core::ml::predict(&m, &ds.x).unwrap();
        prop_assert!(p.values.iter().all(|v| *v >= lo - range && *v <= hi + range));
    }
}
