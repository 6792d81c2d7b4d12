use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Hyperparameters;
use super::evaluate::Evaluation;
use crate::data::SplitKind;
use crate::error::{Error, Result};
use crate::pretrain::PretrainReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Zero is the evaluation before the first training step.
    pub epoch: usize,
    /// Environment-pool steps taken so far.
    pub steps: u64,
    /// Mean training loss over the epoch; absent for epoch zero.
    pub mean_loss: Option<f64>,
    /// Learning rate after this epoch's adaptation.
    pub learning_rate: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub train_reward: f64,
    pub validation_reward: f64,
    pub validation_accuracy: f64,
    pub validation_mean_cost: f64,
}

/// Summary of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub lambda: f64,
    pub hyperparameters: Hyperparameters,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub hpc: bool,
    pub pretrain: Option<PretrainReport>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Reason training stopped on a non-finite loss or gradient.
    pub diverged: Option<String>,
    pub env_steps: u64,
    pub gradient_updates: u64,
    pub target_updates: u64,
    pub episodes_completed: u64,
    /// Validation performance of the kept parameters.
    pub validation: Evaluation,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("run report: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One point of the cost/accuracy trade-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub seed: u64,
    pub split: SplitKind,
    pub mean_cost: f64,
    pub accuracy: f64,
    pub mean_reward: f64,
    pub objective: f64,
}

impl TradeoffPoint {
    pub fn from_evaluation(lambda: f64, seed: u64, split: SplitKind, e: &Evaluation) -> Self {
        Self {
            lambda,
            seed,
            split,
            mean_cost: e.mean_cost,
            accuracy: e.accuracy,
            mean_reward: e.mean_reward,
            objective: e.objective,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda,
            self.mean_cost,
            self.accuracy,
            self.mean_reward,
            self.objective,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data("trade-off point has a non-finite value".into()));
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::Data(format!(
                "accuracy {} outside [0, 1]",
                self.accuracy
            )));
        }
        if self.mean_cost < 0.0 {
            return Err(Error::Data(format!(
                "negative mean cost {}",
                self.mean_cost
            )));
        }
        Ok(())
    }
}

pub fn write_tradeoff_csv<W: Write>(writer: W, points: &[TradeoffPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)
            .map_err(|e| Error::Data(format!("writing trade-off csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing trade-off csv: {e}")))
}

pub fn read_tradeoff_csv<R: Read>(reader: R) -> Result<Vec<TradeoffPoint>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    for (i, rec) in r.deserialize::<TradeoffPoint>().enumerate() {
        let p = rec.map_err(|e| Error::Data(format!("trade-off csv row {}: {e}", i + 1)))?;
        p.validate()?;
        points.push(p);
    }
    Ok(points)
}

pub fn save_tradeoff_csv(path: &Path, points: &[TradeoffPoint]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_tradeoff_csv(std::io::BufWriter::new(file), points)
}

pub fn load_tradeoff_csv(path: &Path) -> Result<Vec<TradeoffPoint>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tradeoff_csv(std::io::BufReader::new(file))
}
