//! Episodic costly-feature classification process.
//!
//! An episode classifies one dataset sample. The agent starts with no
//! features revealed, may buy features one at a time for `−λ·cost`, and ends
//! the episode by predicting a class (0 if correct, otherwise the negated
//! misclassification cost) or by forwarding the sample to the external
//! classifier, which charges every remaining feature.

use rand::Rng;

use crate::data::{CostSchedule, Dataset, HpcPredictions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Classify(usize),
    SelectFeature(usize),
    QueryHpc,
}

/// Maps actions to network output indices: classes first, then features,
/// then the optional external-classifier action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub classes: usize,
    pub features: usize,
    pub hpc: bool,
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.classes + self.features + usize::from(self.hpc)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, action: Action) -> usize {
        match action {
            Action::Classify(k) => k,
            Action::SelectFeature(i) => self.classes + i,
            Action::QueryHpc => self.classes + self.features,
        }
    }

    pub fn action(&self, index: usize) -> Option<Action> {
        if index < self.classes {
            Some(Action::Classify(index))
        } else if index < self.classes + self.features {
            Some(Action::SelectFeature(index - self.classes))
        } else if self.hpc && index == self.classes + self.features {
            Some(Action::QueryHpc)
        } else {
            None
        }
    }
}

/// Masked view of a sample: revealed values (zero elsewhere) and the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Observation {
    pub fn empty(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            mask: vec![false; n],
        }
    }

    /// Applies `mask` to `x`.
    pub fn masked(x: &[f64], mask: Vec<bool>) -> Self {
        let values = x
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        Self { values, mask }
    }

    pub fn n_features(&self) -> usize {
        self.values.len()
    }

    /// Network input width, `2n`.
    pub fn input_width(&self) -> usize {
        2 * self.values.len()
    }

    /// Writes the concatenation of masked values and mask into `out`.
    pub fn write_input(&self, out: &mut [f64]) {
        let n = self.values.len();
        out[..n].copy_from_slice(&self.values);
        for (o, &m) in out[n..2 * n].iter_mut().zip(&self.mask) {
            *o = if m { 1.0 } else { 0.0 };
        }
    }

    pub fn acquired_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Per-class-pair misclassification costs; `cost(true, predicted)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisclassificationCosts {
    classes: usize,
    values: Vec<f64>,
}

impl MisclassificationCosts {
    pub fn uniform(classes: usize) -> Self {
        let mut values = vec![1.0; classes * classes];
        for k in 0..classes {
            values[k * classes + k] = 0.0;
        }
        Self { classes, values }
    }

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::Config(
                "misclassification matrix must be square".into(),
            ));
        }
        let values: Vec<f64> = rows.concat();
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "misclassification costs must be non-negative".into(),
            ));
        }
        Ok(Self { classes, values })
    }

    pub fn cost(&self, truth: usize, predicted: usize) -> f64 {
        self.values[truth * self.classes + predicted]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

/// Everything that defines the reward structure of an episode.
#[derive(Debug, Clone, Copy)]
pub struct Task<'a> {
    pub dataset: &'a Dataset,
    pub costs: &'a CostSchedule,
    pub lambda: f64,
    pub hpc: Option<&'a HpcPredictions>,
    pub misclassification: Option<&'a MisclassificationCosts>,
}

impl<'a> Task<'a> {
    pub fn new(dataset: &'a Dataset, costs: &'a CostSchedule, lambda: f64) -> Result<Self> {
        if costs.len() != dataset.n_features() {
            return Err(Error::Config(format!(
                "{} costs for {} features",
                costs.len(),
                dataset.n_features()
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self {
            dataset,
            costs,
            lambda,
            hpc: None,
            misclassification: None,
        })
    }

    pub fn with_hpc(mut self, hpc: &'a HpcPredictions) -> Self {
        self.hpc = Some(hpc);
        self
    }

    pub fn with_misclassification(mut self, costs: &'a MisclassificationCosts) -> Result<Self> {
        if costs.classes() != self.dataset.class_count() {
            return Err(Error::Config(format!(
                "misclassification matrix for {} classes, dataset has {}",
                costs.classes(),
                self.dataset.class_count()
            )));
        }
        self.misclassification = Some(costs);
        Ok(self)
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace {
            classes: self.dataset.class_count(),
            features: self.dataset.n_features(),
            hpc: self.hpc.is_some(),
        }
    }

    fn classification_reward(&self, truth: usize, predicted: usize) -> f64 {
        match self.misclassification {
            Some(m) => -m.cost(truth, predicted),
            None if truth == predicted => 0.0,
            None => -1.0,
        }
    }
}

/// Hidden state: the sample, its label and which features were bought.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub sample_index: usize,
    pub x: Vec<f64>,
    pub y: usize,
    pub acquired: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepInfo {
    pub was_classification: bool,
    pub was_correct: Option<bool>,
    /// Features acquired so far in the episode.
    pub features_used: usize,
    pub hpc_used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    /// `None` marks the terminal state.
    pub next_observation: Option<Observation>,
    pub episode_done: bool,
    pub info: StepInfo,
    /// Feature cost charged by this step, before scaling by λ.
    pub feature_cost: f64,
}

#[derive(Debug, Clone)]
pub struct Environment<'a> {
    task: Task<'a>,
    state: Option<EnvState>,
}

impl<'a> Environment<'a> {
    pub fn new(task: Task<'a>) -> Result<Self> {
        if task.dataset.is_empty() {
            return Err(Error::Config(
                "environment needs a non-empty dataset".into(),
            ));
        }
        Ok(Self { task, state: None })
    }

    pub fn task(&self) -> &Task<'a> {
        &self.task
    }

    pub fn action_space(&self) -> ActionSpace {
        self.task.action_space()
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    /// Starts an episode on dataset row `sample` with nothing revealed.
    pub fn reset(&mut self, sample: usize) -> Result<Observation> {
        let ds = self.task.dataset;
        if sample >= ds.len() {
            return Err(Error::InvalidInput(format!(
                "sample {sample} out of range for {} rows",
                ds.len()
            )));
        }
        let n = ds.n_features();
        self.state = Some(EnvState {
            sample_index: sample,
            x: ds.sample(sample).to_vec(),
            y: ds.label(sample),
            acquired: vec![false; n],
        });
        Ok(Observation::empty(n))
    }

    /// Starts an episode on a uniformly drawn row of `split`.
    pub fn reset_random<R: Rng + ?Sized>(
        &mut self,
        split: &[usize],
        rng: &mut R,
    ) -> Result<Observation> {
        if split.is_empty() {
            return Err(Error::Config("cannot draw from an empty split".into()));
        }
        let sample = split[rng.random_range(0..split.len())];
        self.reset(sample)
    }

    pub fn observation(&self) -> Option<Observation> {
        self.state
            .as_ref()
            .map(|s| Observation::masked(&s.x, s.acquired.clone()))
    }

    /// Legality of every action index in the current state.
    pub fn legal_mask(&self) -> Result<Vec<bool>> {
        let state = self.active()?;
        Ok(legal_mask_for(&self.action_space(), &state.acquired))
    }

    pub fn legal_actions(&self) -> Result<Vec<Action>> {
        let space = self.action_space();
        Ok(self
            .legal_mask()?
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .filter_map(|(i, _)| space.action(i))
            .collect())
    }

    fn active(&self) -> Result<&EnvState> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::ContractViolation("no active episode; call reset".into()))
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        let task = self.task;
        let space = task.action_space();
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::ContractViolation("no active episode; call reset".into()))?;
        let used = state.acquired.iter().filter(|&&a| a).count();
        match action {
            Action::Classify(k) => {
                if k >= space.classes {
                    return Err(Error::ContractViolation(format!("unknown class {k}")));
                }
                let y = state.y;
                self.state = None;
                Ok(StepResult {
                    reward: task.classification_reward(y, k),
                    next_observation: None,
                    episode_done: true,
                    info: StepInfo {
                        was_classification: true,
                        was_correct: Some(k == y),
                        features_used: used,
                        hpc_used: false,
                    },
                    feature_cost: 0.0,
                })
            }
            Action::SelectFeature(i) => {
                match state.acquired.get(i) {
                    None => return Err(Error::ContractViolation(format!("unknown feature {i}"))),
                    Some(true) => {
                        return Err(Error::ContractViolation(format!(
                            "feature {i} already acquired"
                        )))
                    }
                    Some(false) => {}
                }
                state.acquired[i] = true;
                let cost = task.costs.costs()[i];
                Ok(StepResult {
                    reward: -task.lambda * cost,
                    next_observation: Some(Observation::masked(&state.x, state.acquired.clone())),
                    episode_done: false,
                    info: StepInfo {
                        was_classification: false,
                        was_correct: None,
                        features_used: used + 1,
                        hpc_used: false,
                    },
                    feature_cost: cost,
                })
            }
            Action::QueryHpc => {
                let hpc = task.hpc.ok_or_else(|| {
                    Error::ContractViolation("no external classifier configured".into())
                })?;
                let remaining: f64 = state
                    .acquired
                    .iter()
                    .zip(task.costs.costs())
                    .filter(|(&a, _)| !a)
                    .map(|(_, c)| c)
                    .sum();
                let predicted = hpc.predict(state.sample_index);
                let y = state.y;
                self.state = None;
                Ok(StepResult {
                    reward: -task.lambda * remaining + task.classification_reward(y, predicted),
                    next_observation: None,
                    episode_done: true,
                    info: StepInfo {
                        was_classification: true,
                        was_correct: Some(predicted == y),
                        features_used: used,
                        hpc_used: true,
                    },
                    feature_cost: remaining,
                })
            }
        }
    }
}

pub fn legal_mask_for(space: &ActionSpace, acquired: &[bool]) -> Vec<bool> {
    let mut mask = vec![true; space.len()];
    for (i, &a) in acquired.iter().enumerate() {
        mask[space.classes + i] = !a;
    }
    mask
}
