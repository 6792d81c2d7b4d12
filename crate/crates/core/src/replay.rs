//! Circular episode memory.
//!
//! Capacity is counted in episodes; batches are counted in steps.

use std::collections::VecDeque;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Observation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    /// Action index in the task's [`ActionSpace`](crate::env::ActionSpace).
    pub action: usize,
    pub reward: f64,
    /// `None` when the action ended the episode.
    pub next_observation: Option<Observation>,
    /// Probability the behaviour policy assigned to `action`.
    pub behavior_prob: f64,
    /// Legal actions in the successor state; empty for terminal transitions.
    pub legal_next: Vec<bool>,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.next_observation.is_none()
    }
}

/// Transitions of one episode, ending in its only terminal transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    transitions: Vec<Transition>,
}

impl Episode {
    pub fn new(transitions: Vec<Transition>) -> Result<Self> {
        let Some(last) = transitions.last() else {
            return Err(Error::InvalidInput("empty episode".into()));
        };
        if !last.is_terminal() {
            return Err(Error::InvalidInput(
                "episode does not end in a terminal transition".into(),
            ));
        }
        if transitions[..transitions.len() - 1]
            .iter()
            .any(Transition::is_terminal)
        {
            return Err(Error::InvalidInput(
                "terminal transition before the end of the episode".into(),
            ));
        }
        if let Some(t) = transitions
            .iter()
            .find(|t| !(t.behavior_prob > 0.0 && t.behavior_prob <= 1.0))
        {
            return Err(Error::InvalidInput(format!(
                "behaviour probability {} outside (0, 1]",
                t.behavior_prob
            )));
        }
        Ok(Self { transitions })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<(u64, Episode)>,
    next_tag: u64,
    total_steps: usize,
    rng: ChaCha8Rng,
    /// Cumulative step counts, rebuilt lazily after mutation.
    offsets: Vec<usize>,
    offsets_dirty: bool,
}

impl ReplayBuffer {
    pub fn new(capacity_episodes: usize, seed: u64) -> Result<Self> {
        if capacity_episodes == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity: capacity_episodes,
            episodes: VecDeque::with_capacity(capacity_episodes.min(1 << 16)),
            next_tag: 0,
            total_steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            offsets: Vec::new(),
            offsets_dirty: false,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of stored episodes.
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Insertion tags of the stored episodes, oldest first.
    pub fn tags(&self) -> impl Iterator<Item = u64> + '_ {
        self.episodes.iter().map(|(t, _)| *t)
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().map(|(_, e)| e)
    }

    /// Appends an episode, evicting the oldest when full. Returns its tag.
    pub fn push_episode(&mut self, episode: Episode) -> u64 {
        if self.episodes.len() == self.capacity {
            if let Some((_, old)) = self.episodes.pop_front() {
                self.total_steps -= old.len();
            }
        }
        let tag = self.next_tag;
        self.next_tag += 1;
        self.total_steps += episode.len();
        self.episodes.push_back((tag, episode));
        self.offsets_dirty = true;
        tag
    }

    fn refresh_offsets(&mut self) {
        if !self.offsets_dirty && self.offsets.len() == self.episodes.len() {
            return;
        }
        self.offsets.clear();
        let mut acc = 0;
        for (_, e) in &self.episodes {
            acc += e.len();
            self.offsets.push(acc);
        }
        self.offsets_dirty = false;
    }

    /// Draws `count` transitions uniformly, with replacement.
    pub fn sample_transitions(&mut self, count: usize) -> Result<Vec<&Transition>> {
        if self.is_empty() {
            return Err(Error::NotReady("replay buffer is empty".into()));
        }
        self.refresh_offsets();
        let picks: Vec<(usize, usize)> = (0..count)
            .map(|_| {
                let global = self.rng.random_range(0..self.total_steps);
                let ep = self.offsets.partition_point(|&end| end <= global);
                let start = if ep == 0 { 0 } else { self.offsets[ep - 1] };
                (ep, global - start)
            })
            .collect();
        Ok(picks
            .into_iter()
            .map(|(ep, step)| &self.episodes[ep].1.transitions[step])
            .collect())
    }

    /// Draws whole episodes until their total length reaches `step_budget`
    /// (at least one episode). Episodes are distinct within a batch when the
    /// buffer holds enough steps to meet the budget.
    pub fn sample_episodes(&mut self, step_budget: usize) -> Result<Vec<&Episode>> {
        if self.is_empty() {
            return Err(Error::NotReady("replay buffer is empty".into()));
        }
        let mut chosen = Vec::new();
        let mut steps = 0;
        if self.total_steps >= step_budget {
            let order = index::sample(&mut self.rng, self.episodes.len(), self.episodes.len());
            for i in order {
                chosen.push(i);
                steps += self.episodes[i].1.len();
                if steps >= step_budget {
                    break;
                }
            }
        } else {
            loop {
                let i = self.rng.random_range(0..self.episodes.len());
                chosen.push(i);
                steps += self.episodes[i].1.len();
                if steps >= step_budget {
                    break;
                }
            }
        }
        Ok(chosen.into_iter().map(|i| &self.episodes[i].1).collect())
    }
}
