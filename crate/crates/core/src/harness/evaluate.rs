use serde::{Deserialize, Serialize};

use crate::agent::{greedy_action, observation_matrix};
use crate::env::{ActionSpace, Environment, Observation, Task};
use crate::error::{Error, Result};
use crate::nn::NetworkParams;

/// Rows handed to a policy at once.
const EVAL_CHUNK: usize = 1024;

/// Deterministic action choice for a batch of states.
pub trait Policy {
    fn choose(&mut self, observations: &[Observation], legal: &[Vec<bool>]) -> Result<Vec<usize>>;
}

/// Highest legal Q-value of a network.
#[derive(Debug, Clone, Copy)]
pub struct GreedyPolicy<'a> {
    params: &'a NetworkParams,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(params: &'a NetworkParams) -> Self {
        Self { params }
    }
}

impl Policy for GreedyPolicy<'_> {
    fn choose(&mut self, observations: &[Observation], legal: &[Vec<bool>]) -> Result<Vec<usize>> {
        let n = self.params.architecture().inputs / 2;
        let q = self.params.forward(&observation_matrix(observations, n))?;
        legal
            .iter()
            .enumerate()
            .map(|(i, l)| {
                greedy_action(q.row(i), l)
                    .ok_or_else(|| Error::ContractViolation("no legal action".into()))
            })
            .collect()
    }
}

/// Always takes the same action, typically the external classifier or a
/// fixed class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedAction(pub usize);

impl FixedAction {
    pub fn hpc(space: &ActionSpace) -> Result<Self> {
        if !space.hpc {
            return Err(Error::Config("task has no external classifier".into()));
        }
        Ok(Self(space.len() - 1))
    }

    pub fn class(space: &ActionSpace, class: usize) -> Result<Self> {
        if class >= space.classes {
            return Err(Error::InvalidInput(format!("unknown class {class}")));
        }
        Ok(Self(class))
    }
}

impl Policy for FixedAction {
    fn choose(&mut self, observations: &[Observation], legal: &[Vec<bool>]) -> Result<Vec<usize>> {
        debug_assert_eq!(observations.len(), legal.len());
        Ok(vec![self.0; legal.len()])
    }
}

/// Aggregate outcome of running a policy once on every sample of a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub lambda: f64,
    pub accuracy: f64,
    /// Mean summed feature cost per sample, unscaled. An external classifier
    /// query counts the costs of every feature it left unrevealed.
    pub mean_cost: f64,
    /// `lambda * mean_cost`.
    pub mean_scaled_cost: f64,
    pub mean_reward: f64,
    /// Error rate plus scaled cost.
    pub objective: f64,
    pub hpc_fraction: f64,
    /// Episodes by number of features acquired, `0..=n`.
    pub feature_histogram: Vec<usize>,
    /// Episodes ending in an external classifier query, by features acquired.
    pub hpc_histogram: Vec<usize>,
}

pub fn objective(accuracy: f64, lambda: f64, mean_cost: f64) -> f64 {
    (1.0 - accuracy) + lambda * mean_cost
}

struct Running<'a> {
    env: Environment<'a>,
    obs: Observation,
}

/// Runs `policy` once per sample in `indices` and aggregates the outcomes.
pub fn evaluate<P: Policy + ?Sized>(
    policy: &mut P,
    task: &Task<'_>,
    indices: &[usize],
) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("cannot evaluate an empty split".into()));
    }
    let n = task.dataset.n_features();
    let mut correct = 0usize;
    let mut total_cost = 0.0;
    let mut total_reward = 0.0;
    let mut hpc_count = 0usize;
    let mut feature_histogram = vec![0usize; n + 1];
    let mut hpc_histogram = vec![0usize; n + 1];

    for chunk in indices.chunks(EVAL_CHUNK) {
        let mut running: Vec<Running<'_>> = chunk
            .iter()
            .map(|&i| {
                let mut env = Environment::new(*task)?;
                let obs = env.reset(i)?;
                Ok(Running { env, obs })
            })
            .collect::<Result<_>>()?;
        // Every episode ends within n + 1 steps.
        for _ in 0..=n {
            if running.is_empty() {
                break;
            }
            let observations: Vec<Observation> = running.iter().map(|r| r.obs.clone()).collect();
            let legal: Vec<Vec<bool>> = running
                .iter()
                .map(|r| r.env.legal_mask())
                .collect::<Result<_>>()?;
            let actions = policy.choose(&observations, &legal)?;
            if actions.len() != running.len() {
                return Err(Error::ContractViolation(
                    "policy returned the wrong number of actions".into(),
                ));
            }
            let space = task.action_space();
            let mut still = Vec::with_capacity(running.len());
            for (mut r, a) in running.into_iter().zip(actions) {
                let action = space
                    .action(a)
                    .ok_or_else(|| Error::ContractViolation(format!("unknown action {a}")))?;
                let step = r.env.step(action)?;
                total_reward += step.reward;
                total_cost += step.feature_cost;
                match step.next_observation {
                    Some(obs) => {
                        r.obs = obs;
                        still.push(r);
                    }
                    None => {
                        if step.info.was_correct == Some(true) {
                            correct += 1;
                        }
                        feature_histogram[step.info.features_used] += 1;
                        if step.info.hpc_used {
                            hpc_count += 1;
                            hpc_histogram[step.info.features_used] += 1;
                        }
                    }
                }
            }
            running = still;
        }
        if !running.is_empty() {
            return Err(Error::ContractViolation(
                "episode exceeded the maximum length".into(),
            ));
        }
    }

    let count = indices.len() as f64;
    let accuracy = correct as f64 / count;
    let mean_cost = total_cost / count;
    Ok(Evaluation {
        samples: indices.len(),
        lambda: task.lambda,
        accuracy,
        mean_cost,
        mean_scaled_cost: task.lambda * mean_cost,
        mean_reward: total_reward / count,
        objective: objective(accuracy, task.lambda, mean_cost),
        hpc_fraction: hpc_count as f64 / count,
        feature_histogram,
        hpc_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CostSchedule, Dataset, HpcPredictions};

    fn toy() -> Dataset {
        Dataset::from_parts(
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.5],
                vec![1.0, 0.2],
                vec![-1.0, 0.1],
            ],
            vec![0, 1, 0, 0],
            vec!["a".into(), "b".into()],
            vec!["f0".into(), "f1".into()],
        )
        .unwrap()
    }

    #[test]
    fn fixed_class_matches_class_frequency() {
        let ds = toy();
        let costs = CostSchedule::uniform(2);
        let task = Task::new(&ds, &costs, 0.5).unwrap();
        let mut p = FixedAction::class(&task.action_space(), 0).unwrap();
        let e = evaluate(&mut p, &task, &[0, 1, 2, 3]).unwrap();
        assert_eq!(e.accuracy, 0.75);
        assert_eq!(e.mean_cost, 0.0);
        assert_eq!(e.mean_reward, -0.25);
        assert_eq!(e.objective, 0.25);
        assert_eq!(e.feature_histogram, vec![4, 0, 0]);
    }

    #[test]
    fn hpc_pays_for_all_features() {
        let ds = toy();
        let costs = CostSchedule::uniform(2);
        let hpc = HpcPredictions::new(vec![0, 1, 0, 1], &ds).unwrap();
        let task = Task::new(&ds, &costs, 0.01).unwrap().with_hpc(&hpc);
        let mut p = FixedAction::hpc(&task.action_space()).unwrap();
        let e = evaluate(&mut p, &task, &[0, 1, 2, 3]).unwrap();
        assert_eq!(e.accuracy, 0.75);
        assert_eq!(e.mean_cost, 2.0);
        assert_eq!(e.mean_scaled_cost, 0.02);
        assert_eq!(e.hpc_fraction, 1.0);
        assert_eq!(e.hpc_histogram, vec![4, 0, 0]);
    }

    #[test]
    fn empty_split_rejected() {
        let ds = toy();
        let costs = CostSchedule::uniform(2);
        let task = Task::new(&ds, &costs, 0.01).unwrap();
        assert!(evaluate(&mut FixedAction(0), &task, &[]).is_err());
    }
}
