use super::config::DataConfig;
use crate::data::{assign_costs, CostSchedule, Dataset, HpcPredictions, NormStats, Splits};
use crate::env::Task;
use crate::error::{Error, Result};

/// A normalized dataset with its splits, feature costs and optional external
/// classifier predictions.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dataset: Dataset,
    pub splits: Splits,
    pub costs: CostSchedule,
    pub hpc: Option<HpcPredictions>,
}

impl Problem {
    /// Normalizes `dataset` with `normalization`, or with statistics of the
    /// training split when `None`.
    pub fn new(
        mut dataset: Dataset,
        splits: Splits,
        costs: CostSchedule,
        hpc: Option<HpcPredictions>,
        normalization: Option<NormStats>,
    ) -> Result<Self> {
        if costs.len() != dataset.n_features() {
            return Err(Error::Config(format!(
                "{} feature costs for {} features",
                costs.len(),
                dataset.n_features()
            )));
        }
        match normalization {
            Some(stats) => {
                dataset.apply_normalization(stats)?;
            }
            None if dataset.normalization().is_none() => {
                dataset.normalize(&splits.train)?;
            }
            None => {}
        }
        Ok(Self {
            dataset,
            splits,
            costs,
            hpc,
        })
    }

    pub fn load(cfg: &DataConfig, normalization: Option<NormStats>) -> Result<Self> {
        let path = cfg
            .path
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset path given".into()))?;
        let dataset = Dataset::load(path, &cfg.schema())?;
        let splits = Splits::new(&dataset, &cfg.split_spec()?)?;
        let costs = assign_costs(dataset.feature_names(), &cfg.costs)?;
        let hpc = cfg
            .hpc_predictions
            .as_deref()
            .map(|p| HpcPredictions::load(p, &dataset))
            .transpose()?;
        Self::new(dataset, splits, costs, hpc, normalization)
    }

    pub fn task(&self, lambda: f64, use_hpc: bool) -> Result<Task<'_>> {
        let task = Task::new(&self.dataset, &self.costs, lambda)?;
        match (use_hpc, &self.hpc) {
            (false, _) => Ok(task),
            (true, Some(h)) => Ok(task.with_hpc(h)),
            (true, None) => Err(Error::Config(
                "external classifier enabled but no predictions given".into(),
            )),
        }
    }
}
