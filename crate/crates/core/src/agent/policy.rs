use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear interpolation from `start` to `end` over `steps`, constant after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub steps: u64,
}

impl LinearSchedule {
    pub fn new(start: f64, end: f64, steps: u64) -> Self {
        Self { start, end, steps }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, value, 0)
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.steps {
            return self.end;
        }
        let frac = step as f64 / self.steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Exploration (`ε`) and target-policy (`η`) schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub epsilon: LinearSchedule,
    pub eta: LinearSchedule,
}

impl PolicyConfig {
    pub fn for_epoch_length(epoch_length: u64) -> Self {
        let steps = 2 * epoch_length;
        Self {
            epsilon: LinearSchedule::new(1.0, 0.1, steps),
            eta: LinearSchedule::new(0.5, 0.0, steps),
        }
    }
}

fn legal_count(legal: &[bool]) -> Result<usize> {
    match legal.iter().filter(|&&l| l).count() {
        0 => Err(Error::ContractViolation("no legal action".into())),
        n => Ok(n),
    }
}

/// Highest-valued legal action, ties resolved to the lowest index.
pub fn greedy_action(q: &[f64], legal: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(legal).enumerate() {
        if ok && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// Largest Q-value over legal actions.
pub fn max_legal(q: &[f64], legal: &[bool]) -> Option<f64> {
    greedy_action(q, legal).map(|i| q[i])
}

/// ε-greedy choice: uniform over legal actions with probability `epsilon`,
/// otherwise [`greedy_action`].
pub fn select_action<R: Rng + ?Sized>(
    q: &[f64],
    legal: &[bool],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let count = legal_count(legal)?;
    if rng.random::<f64>() < epsilon {
        let pick = rng.random_range(0..count);
        Ok(legal
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("pick < legal count"))
    } else {
        Ok(greedy_action(q, legal).expect("at least one legal action"))
    }
}

/// Probability that the ε-greedy policy picks `action`.
pub fn behavior_probability(q: &[f64], legal: &[bool], epsilon: f64, action: usize) -> Result<f64> {
    let count = legal_count(legal)? as f64;
    if !legal.get(action).copied().unwrap_or(false) {
        return Ok(0.0);
    }
    let greedy = greedy_action(q, legal).expect("at least one legal action");
    let base = epsilon / count;
    Ok(if action == greedy {
        1.0 - epsilon + base
    } else {
        base
    })
}

/// η-greedy distribution: `1 − η + η/L` on the greedy action, `η/L` on every
/// other legal action, zero on illegal ones.
pub fn eta_greedy_probs(q: &[f64], legal: &[bool], eta: f64) -> Result<Vec<f64>> {
    let count = legal_count(legal)? as f64;
    let greedy = greedy_action(q, legal).expect("at least one legal action");
    let base = eta / count;
    Ok(legal
        .iter()
        .enumerate()
        .map(|(i, &l)| match (l, i == greedy) {
            (false, _) => 0.0,
            (true, true) => 1.0 - eta + base,
            (true, false) => base,
        })
        .collect())
}
