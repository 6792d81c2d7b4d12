//! Regression targets for the online network.
//!
//! Every variant bootstraps from the target network `φ`, restricts maxima and
//! expectations to the legal actions of the successor state, and (by
//! default) clips targets at zero because all rewards are non-positive.

use serde::{Deserialize, Serialize};

use super::policy::{eta_greedy_probs, greedy_action, max_legal};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::{GradientSet, Matrix, NetworkParams};
use crate::replay::{Episode, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// `r + γ max_a Q^φ(s', a)`.
    OneStep,
    /// `r + γ Q^φ(s', argmax_a Q^θ(s', a))`.
    DoubleQ,
    /// Whole-episode Retrace with an η-greedy target policy over `Q^θ`.
    Retrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub gamma: f64,
    /// Multiplies the truncated importance weight in Retrace.
    pub trace_coefficient: f64,
    pub clip_at_zero: bool,
    pub mode: TargetMode,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            trace_coefficient: 1.0,
            clip_at_zero: true,
            mode: TargetMode::Retrace,
        }
    }
}

impl TargetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma {} outside (0, 1]",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.trace_coefficient) {
            return Err(Error::Config(format!(
                "trace coefficient {} outside [0, 1]",
                self.trace_coefficient
            )));
        }
        Ok(())
    }

    fn clip(&self, q: f64) -> f64 {
        if self.clip_at_zero {
            q.min(0.0)
        } else {
            q
        }
    }
}

/// Stacks observations into a network input matrix.
pub fn observation_matrix<'a, I>(observations: I, n_features: usize) -> Matrix
where
    I: IntoIterator<Item = &'a Observation>,
{
    let observations: Vec<&Observation> = observations.into_iter().collect();
    let mut m = Matrix::zeros(observations.len(), 2 * n_features);
    for (i, o) in observations.iter().enumerate() {
        o.write_input(m.row_mut(i));
    }
    m
}

/// One-step target from already evaluated successor Q-values.
///
/// `next` holds `(Q^θ(s'), Q^φ(s'), legal(s'))`, or `None` for a terminal
/// transition.
pub fn one_step_target_from_values(
    reward: f64,
    next: Option<(&[f64], &[f64], &[bool])>,
    cfg: &TargetConfig,
) -> Result<f64> {
    let q = match next {
        None => reward,
        Some((q_theta, q_phi, legal)) => {
            let bootstrap = match cfg.mode {
                TargetMode::OneStep | TargetMode::Retrace => max_legal(q_phi, legal),
                TargetMode::DoubleQ => greedy_action(q_theta, legal).map(|a| q_phi[a]),
            }
            .ok_or_else(|| Error::ContractViolation("successor has no legal action".into()))?;
            reward + cfg.gamma * bootstrap
        }
    };
    Ok(cfg.clip(q))
}

/// Targets for a batch of individual transitions (`OneStep` or `DoubleQ`).
pub fn transition_targets(
    transitions: &[&Transition],
    theta: &NetworkParams,
    phi: &NetworkParams,
    cfg: &TargetConfig,
) -> Result<Vec<f64>> {
    let n = theta.architecture().inputs / 2;
    let non_terminal: Vec<&Observation> = transitions
        .iter()
        .filter_map(|t| t.next_observation.as_ref())
        .collect();
    let inputs = observation_matrix(non_terminal.iter().copied(), n);
    let (q_theta, q_phi) = if inputs.rows() == 0 {
        (inputs.clone(), inputs)
    } else {
        let q_phi = phi.forward(&inputs)?;
        let q_theta = if cfg.mode == TargetMode::DoubleQ {
            theta.forward(&inputs)?
        } else {
            q_phi.clone()
        };
        (q_theta, q_phi)
    };
    let mut row = 0;
    transitions
        .iter()
        .map(|t| {
            let next = if t.is_terminal() {
                None
            } else {
                let r = row;
                row += 1;
                Some((q_theta.row(r), q_phi.row(r), t.legal_next.as_slice()))
            };
            one_step_target_from_values(t.reward, next, cfg)
        })
        .collect()
}

/// One-step target of a single transition.
pub fn one_step_target(
    transition: &Transition,
    theta: &NetworkParams,
    phi: &NetworkParams,
    cfg: &TargetConfig,
) -> Result<f64> {
    Ok(transition_targets(&[transition], theta, phi, cfg)?[0])
}

/// Inputs to one step of the Retrace recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetraceStep {
    pub reward: f64,
    /// `E_{a∼π} Q^φ(s_{t+1}, a)`, zero when `s_{t+1}` is terminal.
    pub expected_next: f64,
    /// `Q^φ(s_{t+1}, a_{t+1})`, zero when `s_{t+1}` is terminal.
    pub taken_next: f64,
    /// Trace coefficient times the truncated importance weight at `t + 1`.
    pub trace: f64,
}

/// Backward Retrace recursion over one episode:
/// `q_t = r_t + γ·E_π Q^φ(s_{t+1}) + γ·c_{t+1}·(q_{t+1} − Q^φ(s_{t+1}, a_{t+1}))`.
pub fn retrace_recursion(steps: &[RetraceStep], gamma: f64, clip_at_zero: bool) -> Vec<f64> {
    let mut out = vec![0.0; steps.len()];
    let mut next_q = 0.0;
    for (t, s) in steps.iter().enumerate().rev() {
        let mut q = s.reward + gamma * s.expected_next + gamma * s.trace * (next_q - s.taken_next);
        if clip_at_zero {
            q = q.min(0.0);
        }
        out[t] = q;
        next_q = q;
    }
    out
}

/// Truncated importance weight `min(π / μ, 1)`.
pub fn truncated_importance(pi: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Data(format!(
            "recorded behaviour probability {mu} is not positive"
        )));
    }
    Ok((pi / mu).min(1.0))
}

/// Retrace targets for each episode, in episode order.
pub fn retrace_targets(
    episodes: &[&Episode],
    theta: &NetworkParams,
    phi: &NetworkParams,
    cfg: &TargetConfig,
    eta: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = theta.architecture().inputs / 2;
    let successors = episodes.iter().flat_map(|e| {
        e.transitions()
            .iter()
            .filter_map(|t| t.next_observation.as_ref())
    });
    let inputs = observation_matrix(successors, n);
    let (q_theta, q_phi) = if inputs.rows() == 0 {
        (inputs.clone(), inputs)
    } else {
        (theta.forward(&inputs)?, phi.forward(&inputs)?)
    };

    let mut row = 0;
    let mut out = Vec::with_capacity(episodes.len());
    for episode in episodes {
        let ts = episode.transitions();
        let mut steps = Vec::with_capacity(ts.len());
        for (t, tr) in ts.iter().enumerate() {
            if tr.is_terminal() {
                steps.push(RetraceStep {
                    reward: tr.reward,
                    expected_next: 0.0,
                    taken_next: 0.0,
                    trace: 0.0,
                });
                continue;
            }
            let next = &ts[t + 1];
            let (qt, qp) = (q_theta.row(row), q_phi.row(row));
            row += 1;
            let pi = eta_greedy_probs(qt, &tr.legal_next, eta)?;
            let expected: f64 = pi.iter().zip(qp).map(|(p, q)| p * q).sum();
            let rho = truncated_importance(pi[next.action], next.behavior_prob)?;
            steps.push(RetraceStep {
                reward: tr.reward,
                expected_next: expected,
                taken_next: qp[next.action],
                trace: cfg.trace_coefficient * rho,
            });
        }
        out.push(retrace_recursion(&steps, cfg.gamma, cfg.clip_at_zero));
    }
    Ok(out)
}

/// A sampled training batch.
#[derive(Debug, Clone)]
pub enum Batch<'a> {
    Transitions(Vec<&'a Transition>),
    Episodes(Vec<&'a Episode>),
}

impl Batch<'_> {
    pub fn step_count(&self) -> usize {
        match self {
            Batch::Transitions(t) => t.len(),
            Batch::Episodes(e) => e.iter().map(|e| e.len()).sum(),
        }
    }
}

/// Mean squared error between targets and `Q^θ(s_t, a_t)`, with its gradient.
pub fn batch_loss(
    batch: &Batch<'_>,
    theta: &NetworkParams,
    phi: &NetworkParams,
    cfg: &TargetConfig,
    eta: f64,
) -> Result<(f64, GradientSet)> {
    let n = theta.architecture().inputs / 2;
    let (transitions, targets): (Vec<&Transition>, Vec<f64>) = match batch {
        Batch::Transitions(ts) => {
            if cfg.mode == TargetMode::Retrace {
                return Err(Error::Config("Retrace targets need episode batches".into()));
            }
            (ts.clone(), transition_targets(ts, theta, phi, cfg)?)
        }
        Batch::Episodes(eps) => {
            let targets = match cfg.mode {
                TargetMode::Retrace => retrace_targets(eps, theta, phi, cfg, eta)?
                    .into_iter()
                    .flatten()
                    .collect(),
                _ => {
                    let flat: Vec<&Transition> = eps.iter().flat_map(|e| e.transitions()).collect();
                    transition_targets(&flat, theta, phi, cfg)?
                }
            };
            (eps.iter().flat_map(|e| e.transitions()).collect(), targets)
        }
    };
    let inputs = observation_matrix(transitions.iter().map(|t| &t.observation), n);
    let actions: Vec<usize> = transitions.iter().map(|t| t.action).collect();
    theta.loss_and_gradient(&inputs, &actions, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamConfig, AdamState, Architecture};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_clip() -> TargetConfig {
        TargetConfig {
            clip_at_zero: false,
            ..TargetConfig::default()
        }
    }

    #[test]
    fn terminal_target_is_reward() {
        let cfg = TargetConfig::default();
        assert_eq!(one_step_target_from_values(-1.0, None, &cfg).unwrap(), -1.0);
    }

    #[test]
    fn double_q_uses_theta_argmax_and_phi_value() {
        let cfg = TargetConfig {
            mode: TargetMode::DoubleQ,
            ..TargetConfig::default()
        };
        let q_theta = [-0.5, -0.1, 3.0];
        let q_phi = [-0.3, -0.2, 9.0];
        let legal = [true, true, false];
        let q =
            one_step_target_from_values(-0.004, Some((&q_theta, &q_phi, &legal)), &cfg).unwrap();
        assert!((q + 0.204).abs() < 1e-15);
    }

    #[test]
    fn positive_targets_are_clipped() {
        let cfg = TargetConfig {
            mode: TargetMode::OneStep,
            ..TargetConfig::default()
        };
        let q = one_step_target_from_values(-0.1, Some((&[0.4], &[0.4], &[true])), &cfg).unwrap();
        assert_eq!(q, 0.0);
        let q = one_step_target_from_values(
            -0.1,
            Some((&[0.4], &[0.4], &[true])),
            &TargetConfig {
                clip_at_zero: false,
                ..cfg
            },
        )
        .unwrap();
        assert!((q - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_step_retrace_example() {
        // Greedy π over Q^φ(s1) = [0.5, -0.5] puts all mass on action 0.
        let steps = [
            RetraceStep {
                reward: -0.1,
                expected_next: 0.5,
                taken_next: 0.5,
                trace: 1.0,
            },
            RetraceStep {
                reward: -1.0,
                expected_next: 0.0,
                taken_next: 0.0,
                trace: 0.0,
            },
        ];
        let q = retrace_recursion(&steps, 1.0, false);
        assert_eq!(q[1], -1.0);
        assert!((q[0] + 1.1).abs() < 1e-15);
        let single = retrace_recursion(&steps[1..], 1.0, true);
        assert_eq!(single, vec![-1.0]);
    }

    #[test]
    fn importance_weight_truncation() {
        assert_eq!(truncated_importance(0.9, 0.3).unwrap(), 1.0);
        assert!((truncated_importance(0.1, 0.4).unwrap() - 0.25).abs() < 1e-15);
        assert!(truncated_importance(0.5, 0.0).is_err());
    }

    fn random_episode(rng: &mut ChaCha8Rng, n: usize, actions: usize) -> Episode {
        let len = rng.random_range(1..=n + 1);
        let mut mask = vec![false; n];
        let mut ts = Vec::new();
        for t in 0..len {
            let obs = Observation::masked(&vec![0.7; n], mask.clone());
            let terminal = t + 1 == len;
            if !terminal {
                mask[t] = true;
            }
            ts.push(Transition {
                observation: obs,
                action: if terminal { 0 } else { 2 + t },
                reward: -rng.random_range(0.0..1.0),
                next_observation: (!terminal)
                    .then(|| Observation::masked(&vec![0.7; n], mask.clone())),
                behavior_prob: rng.random_range(0.05..=1.0),
                legal_next: if terminal {
                    vec![]
                } else {
                    (0..actions).map(|a| a < 2 || !mask[a - 2]).collect()
                },
            });
        }
        Episode::new(ts).unwrap()
    }

    #[test]
    fn loss_decreases_on_frozen_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 3;
        let arch = Architecture::new(2 * n, [16, 16, 16], 2 + n).unwrap();
        let mut theta = NetworkParams::init(arch, &mut rng).unwrap();
        let phi = theta.clone();
        let episodes: Vec<Episode> = (0..20)
            .map(|_| random_episode(&mut rng, n, 2 + n))
            .collect();
        let refs: Vec<&Episode> = episodes.iter().collect();
        let batch = Batch::Episodes(refs);
        let cfg = TargetConfig::default();
        let mut adam = AdamState::new(&arch, AdamConfig::default());
        let (initial, _) = batch_loss(&batch, &theta, &phi, &cfg, 0.0).unwrap();
        let mut last = initial;
        for _ in 0..100 {
            let (loss, mut g) = batch_loss(&batch, &theta, &phi, &cfg, 0.0).unwrap();
            g.clip_norm(1.0);
            adam.step(&mut theta, &g, 1e-2).unwrap();
            last = loss;
        }
        assert!(last < initial / 10.0, "{initial} -> {last}");
    }

    #[test]
    fn transition_batch_rejected_for_retrace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let arch = Architecture::new(4, [3, 3, 3], 4).unwrap();
        let theta = NetworkParams::init(arch, &mut rng).unwrap();
        let ep = random_episode(&mut rng, 2, 4);
        let batch = Batch::Transitions(ep.transitions().iter().collect());
        assert!(batch_loss(&batch, &theta, &theta, &TargetConfig::default(), 0.0).is_err());
        let cfg = TargetConfig {
            mode: TargetMode::DoubleQ,
            ..no_clip()
        };
        assert!(batch_loss(&batch, &theta, &theta, &cfg, 0.0).is_ok());
    }
}
