use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitKind::Train),
            "validation" | "val" => Ok(SplitKind::Validation),
            "test" => Ok(SplitKind::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

impl std::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a dataset is partitioned.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Per-class seeded shuffle; the test split takes the remainder.
    Stratified {
        train: f64,
        validation: f64,
        seed: u64,
    },
    Explicit {
        train: Vec<usize>,
        validation: Vec<usize>,
        test: Vec<usize>,
    },
}

impl SplitSpec {
    pub fn stratified(seed: u64) -> Self {
        SplitSpec::Stratified {
            train: 0.6,
            validation: 0.2,
            seed,
        }
    }
}

/// Disjoint train/validation/test row indices covering a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn new(dataset: &Dataset, spec: &SplitSpec) -> Result<Self> {
        match spec {
            SplitSpec::Stratified {
                train,
                validation,
                seed,
            } => Self::stratified(dataset, *train, *validation, *seed),
            SplitSpec::Explicit {
                train,
                validation,
                test,
            } => Self::explicit(
                dataset.len(),
                train.clone(),
                validation.clone(),
                test.clone(),
            ),
        }
    }

    pub fn stratified(dataset: &Dataset, train: f64, validation: f64, seed: u64) -> Result<Self> {
        if !(train > 0.0) || !(validation >= 0.0) || train + validation > 1.0 {
            return Err(Error::Config(format!(
                "invalid split fractions train={train}, validation={validation}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Splits {
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for class in 0..dataset.class_count() {
            let mut members: Vec<usize> = (0..dataset.len())
                .filter(|&i| dataset.label(i) == class)
                .collect();
            members.shuffle(&mut rng);
            let count = members.len() as f64;
            let n_train =
                ((count * train).round() as usize).clamp(1.min(members.len()), members.len());
            let n_val = ((count * validation).round() as usize).min(members.len() - n_train);
            out.train.extend_from_slice(&members[..n_train]);
            out.validation
                .extend_from_slice(&members[n_train..n_train + n_val]);
            out.test.extend_from_slice(&members[n_train + n_val..]);
        }
        out.train.sort_unstable();
        out.validation.sort_unstable();
        out.test.sort_unstable();
        Ok(out)
    }

    /// Validates index lists that must be disjoint, in range and cover
    /// every row.
    pub fn explicit(
        rows: usize,
        train: Vec<usize>,
        validation: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let mut owner = vec![None; rows];
        for (kind, list) in [
            (SplitKind::Train, &train),
            (SplitKind::Validation, &validation),
            (SplitKind::Test, &test),
        ] {
            for &i in list {
                let slot = owner.get_mut(i).ok_or_else(|| {
                    Error::Data(format!("{kind} index {i} out of range for {rows} rows"))
                })?;
                if let Some(prev) = slot.replace(kind) {
                    return Err(Error::Data(format!(
                        "row {i} appears in both {prev} and {kind} splits"
                    )));
                }
            }
        }
        let missing: Vec<usize> = (0..rows).filter(|&i| owner[i].is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "split files do not cover rows {:?}",
                &missing[..missing.len().min(20)]
            )));
        }
        if train.is_empty() {
            return Err(Error::Data("training split is empty".into()));
        }
        Ok(Splits {
            train,
            validation,
            test,
        })
    }

    pub fn get(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }
}

/// Parses a split index file: one 0-based row index per line, blank lines
/// ignored.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            l.parse()
                .map_err(|_| Error::Data(format!("line {}: invalid row index {l:?}", n + 1)))
        })
        .collect()
}

pub fn read_index_file(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_index_list(&text)
}
