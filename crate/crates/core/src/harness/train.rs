use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Hyperparameters;
use super::evaluate::{evaluate, Evaluation, GreedyPolicy};
use super::problem::Problem;
use super::report::{EpochRecord, RunReport};
use super::schedule::{adapt_learning_rate, early_stop};
use crate::agent::{
    batch_loss, behavior_probability, observation_matrix, select_action, Batch, TargetMode,
};
use crate::env::{Environment, Observation, Task};
use crate::error::{Error, Result};
use crate::nn::{
    soft_update, AdamConfig, AdamState, Architecture, Checkpoint, CheckpointMeta, Matrix,
    NetworkParams,
};
use crate::pretrain::{pretrain_classifier_head, PretrainReport};
use crate::replay::{Episode, ReplayBuffer, Transition};

/// Result of [`train`]: the report and the kept parameters. After a
/// divergence the checkpoint holds the last finite state and
/// `report.diverged` is set.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
}

struct Slot<'a> {
    env: Environment<'a>,
    obs: Observation,
    legal: Vec<bool>,
    pending: Vec<Transition>,
}

/// Parallel environments stepped together with one batched forward pass.
struct EnvPool<'a> {
    slots: Vec<Slot<'a>>,
    split: &'a [usize],
}

impl<'a> EnvPool<'a> {
    fn new<R: Rng + ?Sized>(
        task: Task<'a>,
        count: usize,
        split: &'a [usize],
        rng: &mut R,
    ) -> Result<Self> {
        let slots = (0..count)
            .map(|_| {
                let mut env = Environment::new(task)?;
                let obs = env.reset_random(split, rng)?;
                let legal = env.legal_mask()?;
                Ok(Slot {
                    env,
                    obs,
                    legal,
                    pending: Vec::new(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { slots, split })
    }

    /// Advances every environment by one ε-greedy action and stores finished
    /// episodes. Returns the number of episodes finished.
    fn step<R: Rng + ?Sized>(
        &mut self,
        theta: &NetworkParams,
        epsilon: f64,
        rng: &mut R,
        buffer: &mut ReplayBuffer,
    ) -> Result<u64> {
        let arch = theta.architecture();
        let q = if epsilon >= 1.0 {
            Matrix::zeros(self.slots.len(), arch.actions)
        } else {
            theta.forward(&observation_matrix(
                self.slots.iter().map(|s| &s.obs),
                arch.inputs / 2,
            ))?
        };
        let mut finished = 0;
        for (i, slot) in self.slots.iter_mut().enumerate() {
            let qi = q.row(i);
            let a = select_action(qi, &slot.legal, epsilon, rng)?;
            let mu = behavior_probability(qi, &slot.legal, epsilon, a)?;
            let space = slot.env.action_space();
            let action = space.action(a).expect("selected action is in range");
            let result = slot.env.step(action)?;
            let legal_next = match &result.next_observation {
                Some(_) => slot.env.legal_mask()?,
                None => Vec::new(),
            };
            let next = result.next_observation;
            let observation = match &next {
                Some(o) => std::mem::replace(&mut slot.obs, o.clone()),
                None => slot.obs.clone(),
            };
            slot.pending.push(Transition {
                observation,
                action: a,
                reward: result.reward,
                next_observation: next,
                behavior_prob: mu,
                legal_next: legal_next.clone(),
            });
            if result.episode_done {
                buffer.push_episode(Episode::new(std::mem::take(&mut slot.pending))?);
                finished += 1;
                slot.obs = slot.env.reset_random(self.split, rng)?;
                slot.legal = slot.env.legal_mask()?;
            } else {
                slot.legal = legal_next;
            }
        }
        Ok(finished)
    }
}

struct Snapshot {
    epoch: usize,
    reward: f64,
    online: NetworkParams,
    target: NetworkParams,
    adam: AdamState,
    validation: Evaluation,
}

struct Init {
    theta: NetworkParams,
    pretrain: Option<PretrainReport>,
    replay_seed: u64,
    rng: ChaCha8Rng,
}

/// Seeds every random stream from `seed`, initializes the network and runs
/// pretraining when enabled.
fn initialize(problem: &Problem, task: &Task<'_>, hp: &Hyperparameters, seed: u64) -> Result<Init> {
    let ds = &problem.dataset;
    let train_idx = problem.splits.train.as_slice();
    let val_idx = if problem.splits.validation.is_empty() {
        train_idx
    } else {
        problem.splits.validation.as_slice()
    };
    let arch = Architecture::new(
        2 * ds.n_features(),
        hp.network.hidden,
        task.action_space().len(),
    )?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = NetworkParams::init(arch, &mut master)?;
    let pretrain_seed: u64 = master.random();
    let replay_seed: u64 = master.random();
    let rng = ChaCha8Rng::seed_from_u64(master.random());
    let pretrain = if hp.training.pretrain {
        let cfg = hp.pretrain_config(train_idx.len(), pretrain_seed);
        Some(pretrain_classifier_head(
            &mut theta, task, train_idx, val_idx, &cfg,
        )?)
    } else {
        None
    };
    Ok(Init {
        theta,
        pretrain,
        replay_seed,
        rng,
    })
}

fn checkpoint_meta(problem: &Problem, task: &Task<'_>, seed: u64) -> CheckpointMeta {
    let ds = &problem.dataset;
    CheckpointMeta {
        n_features: ds.n_features(),
        classes: ds.class_count(),
        hpc: task.action_space().hpc,
        seed,
        lambda: task.lambda,
        normalization: ds.normalization().map(|s| (s.mean.clone(), s.std.clone())),
    }
}

/// Initializes and pretrains a network exactly as [`train`] does before its
/// first training step. The checkpoint's target network equals the online one.
pub fn pretrain(
    problem: &Problem,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<(Checkpoint, PretrainReport)> {
    hp.validate()?;
    if problem.splits.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mut forced = *hp;
    forced.training.pretrain = true;
    let task = problem.task(hp.training.lambda, hp.training.use_hpc)?;
    let init = initialize(problem, &task, &forced, seed)?;
    let adam = AdamState::new(init.theta.architecture(), AdamConfig::default());
    let report = init.pretrain.expect("pretraining forced on");
    let checkpoint = Checkpoint::new(
        checkpoint_meta(problem, &task, seed),
        init.theta.clone(),
        init.theta,
        adam,
    )?;
    Ok((checkpoint, report))
}

fn greedy_eval(theta: &NetworkParams, task: &Task<'_>, indices: &[usize]) -> Result<Evaluation> {
    evaluate(&mut GreedyPolicy::new(theta), task, indices)
}

/// Trains a Q-network on `problem.splits.train` and keeps the parameters
/// with the best greedy validation reward.
pub fn train(problem: &Problem, hp: &Hyperparameters, seed: u64) -> Result<TrainOutcome> {
    hp.validate()?;
    let t = &hp.training;
    let task = problem.task(t.lambda, t.use_hpc)?;
    let ds = &problem.dataset;
    let train_idx = problem.splits.train.as_slice();
    if train_idx.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let val_idx = if problem.splits.validation.is_empty() {
        log::warn!("validation split is empty; validating on the training split");
        train_idx
    } else {
        problem.splits.validation.as_slice()
    };
    let eval_train = &train_idx[..train_idx.len().min(t.eval_train_samples.max(1))];

    let space = task.action_space();
    let Init {
        mut theta,
        pretrain,
        replay_seed,
        mut rng,
    } = initialize(problem, &task, hp, seed)?;
    let arch = *theta.architecture();
    let mut phi = theta.clone();
    let mut adam = AdamState::new(&arch, AdamConfig::default());

    let tcfg = hp.target_config();
    let pcfg = hp.policy_config();
    let mut buffer = ReplayBuffer::new(t.memory_episodes, replay_seed)?;
    let mut pool = EnvPool::new(task, t.env_count, train_idx, &mut rng)?;
    let mut episodes_completed = 0;
    let prefill = t.prefill_steps.unwrap_or(t.batch_steps).max(1);
    while buffer.total_steps() < prefill {
        episodes_completed += pool.step(&theta, 1.0, &mut rng, &mut buffer)?;
    }

    let mut lr = hp.schedules.lr_start;
    let train_eval = greedy_eval(&theta, &task, eval_train)?;
    let val_eval = greedy_eval(&theta, &task, val_idx)?;
    let mut train_history = vec![train_eval.mean_reward];
    let mut val_history = vec![val_eval.mean_reward];
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        steps: 0,
        mean_loss: None,
        learning_rate: lr,
        epsilon: pcfg.epsilon.value(0),
        eta: pcfg.eta.value(0),
        train_reward: train_eval.mean_reward,
        validation_reward: val_eval.mean_reward,
        validation_accuracy: val_eval.accuracy,
        validation_mean_cost: val_eval.mean_cost,
    }];
    let mut best = Snapshot {
        epoch: 0,
        reward: val_eval.mean_reward,
        online: theta.clone(),
        target: phi.clone(),
        adam: adam.clone(),
        validation: val_eval,
    };

    let mut step: u64 = 0;
    let mut env_steps = 0;
    let mut gradient_updates = 0;
    let mut target_updates = 0;
    let mut diverged = None;
    let mut stopped_early = false;
    'epochs: for epoch in 1..=t.max_epochs {
        let mut loss_sum = 0.0;
        for _ in 0..t.epoch_length {
            let epsilon = pcfg.epsilon.value(step);
            let eta = pcfg.eta.value(step);
            episodes_completed += pool.step(&theta, epsilon, &mut rng, &mut buffer)?;
            env_steps += 1;
            let batch = match tcfg.mode {
                TargetMode::Retrace => Batch::Episodes(buffer.sample_episodes(t.batch_steps)?),
                _ => Batch::Transitions(buffer.sample_transitions(t.batch_steps)?),
            };
            let (loss, mut grads) = batch_loss(&batch, &theta, &phi, &tcfg, eta)?;
            if !loss.is_finite() || !grads.is_finite() {
                diverged = Some(format!("non-finite loss or gradient at step {step}"));
                break 'epochs;
            }
            grads.clip_norm(t.max_grad_norm);
            match adam.step(&mut theta, &grads, lr) {
                Ok(()) => {}
                Err(Error::Divergence(msg)) => {
                    diverged = Some(msg);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            gradient_updates += 1;
            soft_update(&mut phi, &theta, t.rho)?;
            target_updates += 1;
            loss_sum += loss;
            step += 1;
        }

        let train_eval = greedy_eval(&theta, &task, eval_train)?;
        let val_eval = greedy_eval(&theta, &task, val_idx)?;
        train_history.push(train_eval.mean_reward);
        val_history.push(val_eval.mean_reward);
        lr = adapt_learning_rate(
            &train_history,
            lr,
            hp.schedules.lr_scale,
            hp.schedules.lr_min,
        );
        log::info!(
            "epoch {epoch}: loss {:.5}, train reward {:.4}, validation reward {:.4} (acc {:.4}, cost {:.3}), lr {lr:e}",
            loss_sum / t.epoch_length as f64,
            train_eval.mean_reward,
            val_eval.mean_reward,
            val_eval.accuracy,
            val_eval.mean_cost,
        );
        epochs.push(EpochRecord {
            epoch,
            steps: step,
            mean_loss: Some(loss_sum / t.epoch_length as f64),
            learning_rate: lr,
            epsilon: pcfg.epsilon.value(step),
            eta: pcfg.eta.value(step),
            train_reward: train_eval.mean_reward,
            validation_reward: val_eval.mean_reward,
            validation_accuracy: val_eval.accuracy,
            validation_mean_cost: val_eval.mean_cost,
        });
        if val_eval.mean_reward > best.reward {
            best = Snapshot {
                epoch,
                reward: val_eval.mean_reward,
                online: theta.clone(),
                target: phi.clone(),
                adam: adam.clone(),
                validation: val_eval,
            };
        }
        if early_stop(&val_history, t.early_stop_patience) {
            stopped_early = true;
            break;
        }
    }

    let meta = checkpoint_meta(problem, &task, seed);
    let (checkpoint, best_epoch, validation) = if diverged.is_some() {
        let validation = greedy_eval(&theta, &task, val_idx)?;
        (
            Checkpoint::new(meta, theta, phi, adam)?,
            epochs.len() - 1,
            validation,
        )
    } else {
        (
            Checkpoint::new(meta, best.online, best.target, best.adam)?,
            best.epoch,
            best.validation,
        )
    };
    if let Some(msg) = &diverged {
        log::error!("training diverged: {msg}");
    }
    let report = RunReport {
        seed,
        lambda: t.lambda,
        hyperparameters: *hp,
        feature_names: ds.feature_names().to_vec(),
        class_names: ds.class_names().to_vec(),
        hpc: space.hpc,
        pretrain,
        epochs,
        best_epoch,
        stopped_early,
        diverged,
        env_steps,
        gradient_updates,
        target_updates,
        episodes_completed,
        validation,
    };
    Ok(TrainOutcome { report, checkpoint })
}
