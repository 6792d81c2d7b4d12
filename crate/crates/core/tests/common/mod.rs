#![allow(dead_code)]

use cwcf::data::{CostSchedule, Dataset, Splits};
use cwcf::harness::{Hyperparameters, Problem};
use cwcf::nn::{Architecture, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two binary features; the label equals feature 0 and feature 1 is noise.
pub fn tiny_mdp_dataset(samples: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let f0 = i % 2;
        let f1 = rng.random_range(0..2usize);
        rows.push(vec![f0 as f64, f1 as f64]);
        labels.push(f0);
    }
    Dataset::from_parts(
        rows,
        labels,
        vec!["zero".into(), "one".into()],
        vec!["f0".into(), "f1".into()],
    )
    .unwrap()
}

pub fn tiny_mdp_problem(split_seed: u64) -> Problem {
    let ds = tiny_mdp_dataset(400, 17);
    let splits = Splits::stratified(&ds, 0.6, 0.2, split_seed).unwrap();
    let costs = CostSchedule::uniform(2);
    Problem::new(ds, splits, costs, None, None).unwrap()
}

/// Gaussian class blobs in `n` dimensions.
pub fn blob_dataset(samples: usize, n: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let k = i % classes;
        rows.push(
            centers[k]
                .iter()
                .map(|c| c + rng.random_range(-1.0..1.0))
                .collect(),
        );
        labels.push(k);
    }
    Dataset::from_parts(
        rows,
        labels,
        (0..classes).map(|k| format!("c{k}")).collect(),
        (0..n).map(|i| format!("x{i}")).collect(),
    )
    .unwrap()
}

/// Small, fast configuration for the tiny problems used in tests.
pub fn small_hyperparameters() -> Hyperparameters {
    let mut hp = Hyperparameters::default();
    hp.network.hidden = [32, 32, 32];
    hp.training.env_count = 16;
    hp.training.batch_steps = 128;
    hp.training.epoch_length = 200;
    hp.training.max_epochs = 10;
    hp.training.memory_episodes = 5_000;
    hp.training.pretrain_states = Some(20_000);
    hp
}

pub fn random_network(arch: Architecture, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetworkParams::init(arch, &mut rng).unwrap();
    // Non-zero biases so every path is exercised.
    for v in p.as_mut_slice() {
        *v += rng.random_range(-0.1..0.1);
    }
    p
}
