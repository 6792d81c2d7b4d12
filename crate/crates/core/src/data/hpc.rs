use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Class predicted by an external high-performance classifier for every
/// dataset row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HpcPredictions {
    predictions: Vec<usize>,
}

impl HpcPredictions {
    pub fn new(predictions: Vec<usize>, dataset: &Dataset) -> Result<Self> {
        if predictions.len() != dataset.len() {
            return Err(Error::Data(format!(
                "{} predictions for {} samples",
                predictions.len(),
                dataset.len()
            )));
        }
        if let Some(&bad) = predictions.iter().find(|&&p| p >= dataset.class_count()) {
            return Err(Error::Data(format!(
                "predicted class index {bad} out of range"
            )));
        }
        Ok(Self { predictions })
    }

    /// Parses `(sample id, predicted class label)` rows. Sample ids are
    /// 0-based row indices of the dataset file; labels use the dataset's
    /// class names. A header row is accepted when its first field is not an
    /// integer.
    pub fn parse(text: &str, dataset: &Dataset) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut slots: Vec<Option<usize>> = vec![None; dataset.len()];
        let mut unknown_labels = Vec::new();
        let mut bad_ids = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Data(format!("HPC predictions: {e}")))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 2 {
                return Err(Error::Data(format!(
                    "HPC predictions row {}: expected 2 fields, got {}",
                    line + 1,
                    record.len()
                )));
            }
            let id: usize = match record[0].parse() {
                Ok(id) => id,
                Err(_) if line == 0 => continue,
                Err(_) => {
                    bad_ids.push(record[0].to_owned());
                    continue;
                }
            };
            let Some(class) = dataset.class_index(&record[1]) else {
                unknown_labels.push(record[1].to_owned());
                continue;
            };
            match slots.get_mut(id) {
                None => bad_ids.push(id.to_string()),
                Some(Some(_)) => {
                    return Err(Error::Data(format!(
                        "HPC predictions list sample {id} twice"
                    )))
                }
                Some(slot) => *slot = Some(class),
            }
        }
        if !bad_ids.is_empty() {
            return Err(Error::Data(format!(
                "HPC predictions contain invalid sample ids {:?}",
                truncate(&bad_ids)
            )));
        }
        if !unknown_labels.is_empty() {
            return Err(Error::Data(format!(
                "HPC predictions contain unknown class labels {:?}",
                truncate(&unknown_labels)
            )));
        }
        let missing: Vec<String> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| i.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "HPC predictions missing sample ids {:?}",
                truncate(&missing)
            )));
        }
        Ok(Self {
            predictions: slots.into_iter().flatten().collect(),
        })
    }

    pub fn load(path: &Path, dataset: &Dataset) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, dataset)
    }

    pub fn predict(&self, sample: usize) -> usize {
        self.predictions[sample]
    }

    /// Fraction of `indices` the classifier labels correctly.
    pub fn accuracy(&self, dataset: &Dataset, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return 0.0;
        }
        let correct = indices
            .iter()
            .filter(|&&i| self.predictions[i] == dataset.label(i))
            .count();
        correct as f64 / indices.len() as f64
    }
}

fn truncate(items: &[String]) -> &[String] {
    &items[..items.len().min(20)]
}
