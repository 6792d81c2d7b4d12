//! Run configuration, read from a TOML file with `[data]`, `[network]`,
//! `[schedules]`, `[training]` and `[sweep]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{LinearSchedule, PolicyConfig, TargetConfig, TargetMode};
use crate::data::{CostSpec, Schema, SplitSpec};
use crate::error::{Error, Result};
use crate::pretrain::{MaskSampling, PretrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub label_column: String,
    pub costs: CostSpec,
    pub hpc_predictions: Option<PathBuf>,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub train_indices: Option<PathBuf>,
    pub validation_indices: Option<PathBuf>,
    pub test_indices: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            label_column: Schema::default().label_column,
            costs: CostSpec::Uniform,
            hpc_predictions: None,
            split_seed: 0,
            train_fraction: 0.6,
            validation_fraction: 0.2,
            train_indices: None,
            validation_indices: None,
            test_indices: None,
        }
    }
}

impl DataConfig {
    pub fn schema(&self) -> Schema {
        Schema {
            label_column: self.label_column.clone(),
        }
    }

    /// Seeded stratified split unless all three index files are given.
    pub fn split_spec(&self) -> Result<SplitSpec> {
        match (
            &self.train_indices,
            &self.validation_indices,
            &self.test_indices,
        ) {
            (None, None, None) => Ok(SplitSpec::Stratified {
                train: self.train_fraction,
                validation: self.validation_fraction,
                seed: self.split_seed,
            }),
            (Some(tr), Some(va), Some(te)) => Ok(SplitSpec::Explicit {
                train: crate::data::read_index_file(tr)?,
                validation: crate::data::read_index_file(va)?,
                test: crate::data::read_index_file(te)?,
            }),
            _ => Err(Error::Config(
                "train, validation and test index files must be given together".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: [usize; 3],
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { hidden: [128; 3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub eta_start: f64,
    pub eta_end: f64,
    /// Decay horizon of ε and η in training steps; twice the epoch length
    /// when unset.
    pub exploration_steps: Option<u64>,
    pub lr_start: f64,
    pub lr_min: f64,
    pub lr_scale: f64,
    pub lr_pretrain: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            eta_start: 0.5,
            eta_end: 0.0,
            exploration_steps: None,
            lr_start: 5e-4,
            lr_min: 1e-7,
            lr_scale: 0.3,
            lr_pretrain: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lambda: f64,
    /// Parallel environments `|E|`.
    pub env_count: usize,
    pub gamma: f64,
    pub retrace_coefficient: f64,
    /// Target network update factor.
    pub rho: f64,
    /// Steps per training batch `|B|`.
    pub batch_steps: usize,
    /// Replay capacity `|M|` in episodes.
    pub memory_episodes: usize,
    /// Random-agent steps stored before training; one batch when unset.
    pub prefill_steps: Option<usize>,
    /// Training steps per epoch.
    pub epoch_length: u64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub target_mode: TargetMode,
    pub clip_targets: bool,
    pub max_grad_norm: f64,
    pub pretrain: bool,
    /// Generated pretraining states; 100 × training samples when unset.
    pub pretrain_states: Option<usize>,
    pub use_hpc: bool,
    /// Training samples evaluated greedily at the end of every epoch.
    pub eval_train_samples: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            env_count: 64,
            gamma: 1.0,
            retrace_coefficient: 1.0,
            rho: 0.1,
            batch_steps: 512,
            memory_episodes: 40_000,
            prefill_steps: None,
            epoch_length: 1000,
            max_epochs: 100,
            early_stop_patience: 3,
            target_mode: TargetMode::Retrace,
            clip_targets: true,
            max_grad_norm: 1.0,
            pretrain: true,
            pretrain_states: None,
            use_hpc: false,
            eval_train_samples: 1000,
        }
    }
}

/// Everything that shapes a training run apart from data and seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub network: NetworkConfig,
    pub schedules: ScheduleConfig,
    pub training: TrainingConfig,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let t = &self.training;
        let s = &self.schedules;
        let positive = [
            ("env_count", t.env_count as f64),
            ("batch_steps", t.batch_steps as f64),
            ("memory_episodes", t.memory_episodes as f64),
            ("epoch_length", t.epoch_length as f64),
            ("max_grad_norm", t.max_grad_norm),
            ("lr_start", s.lr_start),
            ("lr_min", s.lr_min),
            ("lr_scale", s.lr_scale),
            ("lr_pretrain", s.lr_pretrain),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.network.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if !(0.0..=1.0).contains(&t.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", t.lambda)));
        }
        if !(0.0..=1.0).contains(&t.rho) {
            return Err(Error::Config(format!("rho {} outside [0, 1]", t.rho)));
        }
        if s.lr_min > s.lr_start {
            return Err(Error::Config("lr_min exceeds lr_start".into()));
        }
        for (name, v) in [
            ("epsilon_start", s.epsilon_start),
            ("epsilon_end", s.epsilon_end),
            ("eta_start", s.eta_start),
            ("eta_end", s.eta_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        self.target_config().validate()
    }

    pub fn exploration_steps(&self) -> u64 {
        self.schedules
            .exploration_steps
            .unwrap_or(2 * self.training.epoch_length)
    }

    pub fn policy_config(&self) -> PolicyConfig {
        let steps = self.exploration_steps();
        let s = &self.schedules;
        PolicyConfig {
            epsilon: LinearSchedule::new(s.epsilon_start, s.epsilon_end, steps),
            eta: LinearSchedule::new(s.eta_start, s.eta_end, steps),
        }
    }

    pub fn target_config(&self) -> TargetConfig {
        TargetConfig {
            gamma: self.training.gamma,
            trace_coefficient: self.training.retrace_coefficient,
            clip_at_zero: self.training.clip_targets,
            mode: self.training.target_mode,
        }
    }

    pub fn pretrain_config(&self, train_samples: usize, seed: u64) -> PretrainConfig {
        PretrainConfig {
            state_count: if self.training.pretrain {
                self.training.pretrain_states.unwrap_or(100 * train_samples)
            } else {
                0
            },
            learning_rate: self.schedules.lr_pretrain,
            lr_scale: self.schedules.lr_scale,
            lr_min: self.schedules.lr_min,
            mask_sampling: MaskSampling::CubedUniform,
            rng_seed: seed,
            max_grad_norm: self.training.max_grad_norm,
            ..PretrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 0.001, 0.003, 0.01, 0.03, 0.1],
            seeds: vec![0, 1, 2],
        }
    }
}

/// Contents of a configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub schedules: ScheduleConfig,
    pub training: TrainingConfig,
    pub sweep: SweepConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Interprets relative data paths against the configuration file's
    /// directory.
    fn resolve_paths(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [
            &mut d.path,
            &mut d.hpc_predictions,
            &mut d.train_indices,
            &mut d.validation_indices,
            &mut d.test_indices,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let CostSpec::Explicit { path } = &mut d.costs {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            network: self.network,
            schedules: self.schedules,
            training: self.training,
        }
    }
}
