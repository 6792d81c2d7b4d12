use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost levels used for randomly costed features.
pub const RANDOM_COST_LEVELS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// Where per-feature costs come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CostSpec {
    #[default]
    Uniform,
    Random {
        seed: u64,
    },
    Explicit {
        path: PathBuf,
    },
}

/// Non-negative acquisition cost for every feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    costs: Vec<f64>,
}

impl CostSchedule {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if let Some(i) = costs.iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::Data(format!(
                "cost of feature {i} must be a non-negative number, got {}",
                costs[i]
            )));
        }
        Ok(Self { costs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            costs: vec![1.0; n],
        }
    }

    /// I.i.d. draws from [`RANDOM_COST_LEVELS`].
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            costs: (0..n)
                .map(|_| RANDOM_COST_LEVELS[rng.random_range(0..RANDOM_COST_LEVELS.len())])
                .collect(),
        }
    }

    /// Parses a two-column `name,cost` file against the dataset's retained
    /// feature names. A header row is accepted when its cost field is not
    /// numeric. Names of features absent from `feature_names` (for example
    /// dropped constant columns) are ignored; a missing feature is an error.
    pub fn parse(text: &str, feature_names: &[String]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut by_name: HashMap<String, f64> = HashMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("cost file: {e}")))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 2 {
                return Err(Error::Data(format!(
                    "cost file row {}: expected 2 fields, got {}",
                    line + 1,
                    record.len()
                )));
            }
            let name = &record[0];
            let cost = match record[1].parse::<f64>() {
                Ok(c) => c,
                Err(_) if line == 0 => continue,
                Err(_) => {
                    return Err(Error::Data(format!(
                        "cost file row {}: invalid cost {:?}",
                        line + 1,
                        &record[1]
                    )))
                }
            };
            if !(cost >= 0.0) || !cost.is_finite() {
                return Err(Error::Data(format!(
                    "cost file row {}: negative or non-finite cost {cost} for {name:?}",
                    line + 1
                )));
            }
            if by_name.insert(name.to_owned(), cost).is_some() {
                return Err(Error::Data(format!("cost file lists {name:?} twice")));
            }
        }
        let missing: Vec<&str> = feature_names
            .iter()
            .filter(|n| !by_name.contains_key(*n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "cost file covers {} of {} features; missing {missing:?}",
                feature_names.len() - missing.len(),
                feature_names.len()
            )));
        }
        Self::new(feature_names.iter().map(|n| by_name[n]).collect())
    }

    pub fn from_file(path: &Path, feature_names: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, feature_names)
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.costs.iter().sum()
    }
}

/// Builds the cost schedule for a dataset's features.
pub fn assign_costs(feature_names: &[String], spec: &CostSpec) -> Result<CostSchedule> {
    let n = feature_names.len();
    if n == 0 {
        return Err(Error::Data("no features to cost".into()));
    }
    match spec {
        CostSpec::Uniform => Ok(CostSchedule::uniform(n)),
        CostSpec::Random { seed } => Ok(CostSchedule::random(n, *seed)),
        CostSpec::Explicit { path } => CostSchedule::from_file(path, feature_names),
    }
}
