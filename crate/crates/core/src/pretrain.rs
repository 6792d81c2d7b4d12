//! Supervised warm start of the classification outputs.
//!
//! Classification actions end the episode, so their optimal Q-values are the
//! immediate rewards: 0 for the true class and minus the misclassification
//! cost otherwise. Those values are regressed on synthetic partially
//! observed states before reinforcement learning starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::observation_matrix;
use crate::env::{Observation, Task};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, GradientSet, Matrix, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSampling {
    /// `p = u³` with `u ~ U(0, 1)`, then `m_i ~ Bernoulli(p)`.
    CubedUniform,
    /// Every feature revealed.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Number of generated states; zero disables pretraining.
    pub state_count: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lr_scale: f64,
    pub lr_min: f64,
    pub heldout_states: usize,
    pub mask_sampling: MaskSampling,
    pub rng_seed: u64,
    pub max_grad_norm: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            state_count: 0,
            learning_rate: 1e-3,
            batch_size: 256,
            lr_scale: 0.3,
            lr_min: 1e-7,
            heldout_states: 1000,
            mask_sampling: MaskSampling::CubedUniform,
            rng_seed: 0,
            max_grad_norm: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub states_used: usize,
    pub epochs: usize,
    pub heldout_mse_before: f64,
    pub heldout_mse_after: f64,
    pub final_learning_rate: f64,
}

/// Masked copy of `x` whose mask density is drawn as `u³`.
pub fn generate_masked_state<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Observation {
    let u: f64 = rng.random();
    generate_masked_state_with(x, u, rng)
}

/// Masked copy of `x` with each feature revealed with probability `u³`.
pub fn generate_masked_state_with<R: Rng + ?Sized>(x: &[f64], u: f64, rng: &mut R) -> Observation {
    let p = u * u * u;
    let mask = x.iter().map(|_| rng.random::<f64>() < p).collect();
    Observation::masked(x, mask)
}

fn generate<R: Rng + ?Sized>(x: &[f64], mode: MaskSampling, rng: &mut R) -> Observation {
    match mode {
        MaskSampling::CubedUniform => generate_masked_state(x, rng),
        MaskSampling::Full => Observation::masked(x, vec![true; x.len()]),
    }
}

/// Squared error of the classification outputs against their terminal
/// rewards, averaged over rows and classes, with its gradient. Outputs of
/// feature and external-classifier actions carry no loss.
pub fn classification_loss(
    theta: &NetworkParams,
    inputs: &Matrix,
    labels: &[usize],
    task: &Task<'_>,
) -> Result<(f64, GradientSet)> {
    let pass = theta.forward_pass(inputs)?;
    let (loss, d_q) = classification_error(&pass.q, labels, task);
    Ok((loss, theta.backward(&pass, &d_q)?))
}

fn class_target(task: &Task<'_>, truth: usize, k: usize) -> f64 {
    match task.misclassification {
        Some(m) => -m.cost(truth, k),
        None if truth == k => 0.0,
        None => -1.0,
    }
}

fn classification_error(q: &Matrix, labels: &[usize], task: &Task<'_>) -> (f64, Matrix) {
    let classes = task.dataset.class_count();
    let mut d_q = Matrix::zeros(q.rows(), q.cols());
    if labels.is_empty() {
        return (0.0, d_q);
    }
    let scale = 1.0 / (labels.len() * classes) as f64;
    let mut loss = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        for k in 0..classes {
            let err = q.get(b, k) - class_target(task, y, k);
            loss += err * err;
            d_q.set(b, k, 2.0 * err * scale);
        }
    }
    (loss * scale, d_q)
}

fn heldout_mse(
    theta: &NetworkParams,
    inputs: &Matrix,
    labels: &[usize],
    task: &Task<'_>,
) -> Result<f64> {
    let q = theta.forward(inputs)?;
    Ok(classification_error(&q, labels, task).0)
}

/// Pretrains the classification outputs of `theta` on generated states drawn
/// from `train`; held-out states come from `heldout` (or `train` when empty).
pub fn pretrain_classifier_head(
    theta: &mut NetworkParams,
    task: &Task<'_>,
    train: &[usize],
    heldout: &[usize],
    cfg: &PretrainConfig,
) -> Result<PretrainReport> {
    let ds = task.dataset;
    if theta.architecture().inputs != 2 * ds.n_features() {
        return Err(Error::InvalidInput(
            "network input does not match dataset".into(),
        ));
    }
    if cfg.state_count > 0 && train.is_empty() {
        return Err(Error::Config("pretraining needs training samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = ds.n_features();
    let held_pool = if heldout.is_empty() { train } else { heldout };
    let held_count = if held_pool.is_empty() {
        0
    } else {
        cfg.heldout_states
    };
    let mut held_labels = Vec::with_capacity(held_count);
    let held_obs: Vec<Observation> = (0..held_count)
        .map(|_| {
            let i = held_pool[rng.random_range(0..held_pool.len())];
            held_labels.push(ds.label(i));
            generate(ds.sample(i), cfg.mask_sampling, &mut rng)
        })
        .collect();
    let held_inputs = observation_matrix(&held_obs, n);
    let before = heldout_mse(theta, &held_inputs, &held_labels, task)?;

    let mut report = PretrainReport {
        states_used: 0,
        epochs: 0,
        heldout_mse_before: before,
        heldout_mse_after: before,
        final_learning_rate: cfg.learning_rate,
    };
    if cfg.state_count == 0 {
        return Ok(report);
    }

    let batch = cfg.batch_size.max(1);
    let epoch_states = train.len().max(batch);
    let mut adam = AdamState::new(theta.architecture(), AdamConfig::default());
    let mut lr = cfg.learning_rate;
    let mut best = before;
    while report.states_used < cfg.state_count {
        let epoch_end = (report.states_used + epoch_states).min(cfg.state_count);
        while report.states_used < epoch_end {
            let size = batch.min(epoch_end - report.states_used);
            let mut labels = Vec::with_capacity(size);
            let obs: Vec<Observation> = (0..size)
                .map(|_| {
                    let i = train[rng.random_range(0..train.len())];
                    labels.push(ds.label(i));
                    generate(ds.sample(i), cfg.mask_sampling, &mut rng)
                })
                .collect();
            let inputs = observation_matrix(&obs, n);
            let (loss, mut grads) = classification_loss(theta, &inputs, &labels, task)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "pretraining loss became {loss} after {} states",
                    report.states_used
                )));
            }
            grads.clip_norm(cfg.max_grad_norm);
            adam.step(theta, &grads, lr)?;
            report.states_used += size;
        }
        report.epochs += 1;
        let mse = heldout_mse(theta, &held_inputs, &held_labels, task)?;
        if mse < best {
            best = mse;
        } else {
            lr = (lr * cfg.lr_scale).max(cfg.lr_min);
        }
        report.heldout_mse_after = mse;
        log::debug!(
            "pretrain epoch {}: held-out mse {mse:.5}, lr {lr:e}",
            report.epochs
        );
    }
    report.final_learning_rate = lr;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CostSchedule, Dataset};
    use crate::nn::Architecture;

    #[test]
    fn boundary_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [1.0, -2.0, 3.0];
        let empty = generate_masked_state_with(&x, 0.0, &mut rng);
        assert_eq!(empty.values, vec![0.0; 3]);
        assert!(empty.mask.iter().all(|&m| !m));
        let full = generate_masked_state_with(&x, 1.0, &mut rng);
        assert_eq!(full.values, x.to_vec());
        assert!(full.mask.iter().all(|&m| m));
    }

    #[test]
    fn mean_density_is_one_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = [0.5; 4];
        let states = 100_000;
        let revealed: usize = (0..states)
            .map(|_| generate_masked_state(&x, &mut rng).acquired_count())
            .sum();
        let density = revealed as f64 / (states * x.len()) as f64;
        assert!((density - 0.25).abs() < 0.01, "{density}");
    }

    #[test]
    fn density_increases_with_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = [0.5; 8];
        let mut bins = [(0usize, 0usize); 10];
        for _ in 0..50_000 {
            let u: f64 = rng.random();
            let obs = generate_masked_state_with(&x, u, &mut rng);
            let bin = ((u * 10.0) as usize).min(9);
            bins[bin].0 += obs.acquired_count();
            bins[bin].1 += x.len();
        }
        let dens: Vec<f64> = bins.iter().map(|(a, b)| *a as f64 / *b as f64).collect();
        assert!(dens.windows(2).all(|w| w[0] < w[1]), "{dens:?}");
    }

    fn toy() -> Dataset {
        Dataset::from_parts(
            vec![
                vec![1.0, 0.3],
                vec![-1.0, 0.2],
                vec![1.0, -0.1],
                vec![-1.0, 0.0],
            ],
            vec![0, 1, 0, 1],
            vec!["a".into(), "b".into()],
            vec!["f0".into(), "f1".into()],
        )
        .unwrap()
    }

    #[test]
    fn feature_outputs_receive_no_loss() {
        let ds = toy();
        let costs = CostSchedule::uniform(2);
        let task = Task::new(&ds, &costs, 0.1).unwrap();
        let q = Matrix::from_vec(1, 4, vec![0.2, -0.7, 5.0, -3.0]).unwrap();
        let (loss, d_q) = classification_error(&q, &[0], &task);
        assert!((loss - (0.04 + 0.09) / 2.0).abs() < 1e-15);
        assert_eq!(d_q.get(0, 2), 0.0);
        assert_eq!(d_q.get(0, 3), 0.0);
    }

    #[test]
    fn zero_states_leave_parameters_unchanged() {
        let ds = toy();
        let costs = CostSchedule::uniform(2);
        let task = Task::new(&ds, &costs, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Architecture::new(4, [8, 8, 8], 4).unwrap();
        let mut theta = NetworkParams::init(arch, &mut rng).unwrap();
        let before = theta.clone();
        let cfg = PretrainConfig::default();
        pretrain_classifier_head(&mut theta, &task, &[0, 1, 2, 3], &[], &cfg).unwrap();
        assert_eq!(theta, before);
    }
}
