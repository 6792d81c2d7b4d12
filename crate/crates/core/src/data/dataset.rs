use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names the label column of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub label_column: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
        }
    }
}

/// Per-feature mean and standard deviation of the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Feature matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    dropped_features: Vec<String>,
    normalization: Option<NormStats>,
}

impl Dataset {
    /// Builds a dataset from in-memory rows. Labels must already be `0..K`.
    pub fn from_parts(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = feature_names.len();
        if rows.is_empty() {
            return Err(Error::Data("dataset has no samples".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Data(format!(
                "row {r} has {} features, expected {n}",
                rows[r].len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Data(format!("label {bad} without a class name")));
        }
        check_unique(&feature_names, "feature")?;
        Ok(Self {
            features: rows.concat(),
            n_features: n,
            labels,
            class_names,
            feature_names,
            dropped_features: Vec::new(),
            normalization: None,
        })
    }

    /// Reads a comma-delimited file with a header row.
    ///
    /// Class labels are mapped to `0..K` in order of first appearance and
    /// constant feature columns are dropped.
    pub fn from_csv_reader<R: Read>(reader: R, schema: &Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        check_unique(&headers, "column")?;
        let label_col = headers
            .iter()
            .position(|h| *h == schema.label_column)
            .ok_or_else(|| {
                Error::Data(format!(
                    "label column {:?} not found in header {headers:?}",
                    schema.label_column
                ))
            })?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_col)
            .map(|(_, h)| h.clone())
            .collect();

        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut class_names: Vec<String> = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row_no = r + 1;
            let record = record.map_err(|e| Error::Data(format!("data row {row_no}: {e}")))?;
            if record.len() != headers.len() {
                return Err(Error::Data(format!(
                    "data row {row_no} has {} fields, expected {}",
                    record.len(),
                    headers.len()
                )));
            }
            let mut row = Vec::with_capacity(feature_names.len());
            for (c, field) in record.iter().enumerate() {
                if c == label_col {
                    continue;
                }
                if field.is_empty() {
                    return Err(Error::Data(format!(
                        "data row {row_no}, column {:?}: missing value",
                        headers[c]
                    )));
                }
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!(
                        "data row {row_no}, column {:?}: non-numeric value {field:?}",
                        headers[c]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "data row {row_no}, column {:?}: non-finite value {field:?}",
                        headers[c]
                    )));
                }
                row.push(v);
            }
            let label = &record[label_col];
            if label.is_empty() {
                return Err(Error::Data(format!("data row {row_no}: missing label")));
            }
            let class = match class_names.iter().position(|c| c == label) {
                Some(k) => k,
                None => {
                    class_names.push(label.to_owned());
                    class_names.len() - 1
                }
            };
            rows.push(row);
            labels.push(class);
        }
        let mut ds = Self::from_parts(rows, labels, class_names, feature_names)?;
        ds.drop_constant_features()?;
        Ok(ds)
    }

    pub fn load(path: &Path, schema: &Schema) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(file), schema)
    }

    fn drop_constant_features(&mut self) -> Result<()> {
        let n = self.n_features;
        let keep: Vec<usize> = (0..n)
            .filter(|&j| {
                let first = self.features[j];
                (0..self.len()).any(|i| self.features[i * n + j] != first)
            })
            .collect();
        if keep.len() == n {
            return Ok(());
        }
        for j in (0..n).filter(|j| !keep.contains(j)) {
            log::warn!("dropping zero-variance feature {:?}", self.feature_names[j]);
            self.dropped_features.push(self.feature_names[j].clone());
        }
        if keep.is_empty() {
            return Err(Error::Data("every feature column is constant".into()));
        }
        let mut features = Vec::with_capacity(self.len() * keep.len());
        for i in 0..self.len() {
            features.extend(keep.iter().map(|&j| self.features[i * n + j]));
        }
        self.features = features;
        self.feature_names = keep
            .iter()
            .map(|&j| self.feature_names[j].clone())
            .collect();
        self.n_features = keep.len();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn dropped_features(&self) -> &[String] {
        &self.dropped_features
    }

    pub fn sample(&self, index: usize) -> &[f64] {
        &self.features[index * self.n_features..(index + 1) * self.n_features]
    }

    pub fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn normalization(&self) -> Option<&NormStats> {
        self.normalization.as_ref()
    }

    /// Standardizes every row with statistics computed on `train` only.
    ///
    /// A column that happens to be constant within the training rows keeps a
    /// unit scale.
    pub fn normalize(&mut self, train: &[usize]) -> Result<&NormStats> {
        if train.is_empty() {
            return Err(Error::Data(
                "cannot normalize with an empty training split".into(),
            ));
        }
        if let Some(&bad) = train.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Data(format!("training index {bad} out of range")));
        }
        let n = self.n_features;
        let count = train.len() as f64;
        let mut mean = vec![0.0; n];
        for &i in train {
            for (m, v) in mean.iter_mut().zip(self.sample(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for &i in train {
            for ((s, v), m) in var.iter_mut().zip(self.sample(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / count).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        self.apply_normalization(NormStats { mean, std })
    }

    /// Standardizes every row with previously recorded statistics.
    pub fn apply_normalization(&mut self, stats: NormStats) -> Result<&NormStats> {
        if self.normalization.is_some() {
            return Err(Error::Data("dataset is already normalized".into()));
        }
        let n = self.n_features;
        if stats.mean.len() != n || stats.std.len() != n {
            return Err(Error::Data(format!(
                "normalization statistics cover {} features, dataset has {n}",
                stats.mean.len()
            )));
        }
        if stats.std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Data("standard deviations must be positive".into()));
        }
        for row in self.features.chunks_exact_mut(n) {
            for ((v, m), s) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(self.normalization.insert(stats))
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(Error::Data(format!("duplicate {what} name {name:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::from_csv_reader(text.as_bytes(), &Schema::default())
    }

    #[test]
    fn loads_small_file() {
        let ds = parse("a,b,label\n1,2,x\n3,4,y\n5,7,x\n").unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.class_names(), &["x", "y"]);
        assert_eq!(ds.sample(2), &[5.0, 7.0]);
    }

    #[test]
    fn label_column_may_be_anywhere() {
        let ds = parse("label,a,b\nq,1,2\nr,3,5\n").unwrap();
        assert_eq!(ds.feature_names(), &["a", "b"]);
        assert_eq!(ds.sample(1), &[3.0, 5.0]);
    }

    #[test]
    fn constant_column_dropped() {
        let ds = parse("a,c,label\n1,9,x\n2,9,y\n").unwrap();
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.dropped_features(), &["c"]);
        assert_eq!(ds.feature_names(), &["a"]);
    }

    #[test]
    fn ingestion_errors_carry_diagnostics() {
        let err = parse("a,a,label\n1,2,x\n").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
        let err = parse("a,b,label\n1,2,x\n1,x\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        let err = parse("a,b,label\n1,zz,x\n2,3,y\n").unwrap_err().to_string();
        assert!(err.contains("column \"b\"") && err.contains("zz"), "{err}");
        let err = parse("a,b,cls\n1,2,x\n").unwrap_err().to_string();
        assert!(err.contains("label column"), "{err}");
        assert!(parse("a,b,label\n1,,x\n2,3,y\n").is_err());
        assert!(parse("a,b,label\nNaN,1,x\n2,3,y\n").is_err());
        assert!(parse("a,b,label\n").is_err());
    }

    #[test]
    fn normalization_uses_training_statistics() {
        // Training rows 0, 1 have mean 2 and std 2 for the first feature.
        let mut ds = Dataset::from_parts(
            vec![
                vec![0.0, 1.0],
                vec![4.0, 3.0],
                vec![4.0, 100.0],
                vec![10.0, -5.0],
            ],
            vec![0, 1, 0, 1],
            vec!["a".into(), "b".into()],
            vec!["f".into(), "g".into()],
        )
        .unwrap();
        let stats = ds.normalize(&[0, 1]).unwrap().clone();
        assert_eq!(stats.mean, vec![2.0, 2.0]);
        assert_eq!(stats.std, vec![2.0, 1.0]);
        assert_eq!(ds.sample(2), &[1.0, 98.0]);
        assert_eq!(ds.sample(3), &[4.0, -7.0]);
        assert!(ds.normalize(&[0, 1]).is_err());
    }
}
