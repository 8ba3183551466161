use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::attribution::FeatureKind;
use crate::error::{FadError, Result};

pub const LABEL_COLUMN: &str = "label";

/// Optional JSON sidecar for a dataset CSV: feature kinds (default
/// continuous) and an explicit class order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSidecar {
    pub features: BTreeMap<String, FeatureKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

/// Instances x features matrix with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    rows: Vec<Vec<f64>>,
    kinds: Vec<FeatureKind>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl TabularDataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        kinds: Vec<FeatureKind>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = kinds.len();
        if d == 0 {
            return Err(FadError::Config("dataset needs at least one feature".into()));
        }
        if feature_names.len() != d {
            return Err(FadError::Shape(format!("{} feature names for {d} features", feature_names.len())));
        }
        if rows.len() != labels.len() {
            return Err(FadError::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if class_names.is_empty() {
            return Err(FadError::Config("dataset needs at least one class".into()));
        }
        for (i, (row, &label)) in rows.iter().zip(&labels).enumerate() {
            if row.len() != d {
                return Err(FadError::Shape(format!("row {i} has {} features, expected {d}", row.len())));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(FadError::Domain(format!("row {i}, feature {j} is not finite")));
            }
            if label >= class_names.len() {
                return Err(FadError::Index(format!("row {i} has label {label} beyond {} classes", class_names.len())));
            }
        }
        Ok(Self { rows, kinds, labels, feature_names, class_names })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count()];
        for &y in &self.labels {
            sizes[y] += 1;
        }
        sizes
    }

    /// Same data restricted to the given feature columns.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.feature_count()) {
            return Err(FadError::Index(format!("feature {c} out of range")));
        }
        Self::new(
            self.rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(),
            columns.iter().map(|&c| self.kinds[c]).collect(),
            self.labels.clone(),
            columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            self.class_names.clone(),
        )
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            features: self.feature_names.iter().cloned().zip(self.kinds.iter().copied()).collect(),
            classes: Some(self.class_names.clone()),
        }
    }

    /// Reads a headed CSV with one `label` column; every other column is a
    /// numeric feature. Errors carry 1-based line numbers.
    pub fn from_csv(reader: impl Read, sidecar: Option<&DatasetSidecar>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| FadError::Parse { line: 1, message: e.to_string() })?.clone();
        let label_at = headers
            .iter()
            .position(|h| h.trim() == LABEL_COLUMN)
            .ok_or_else(|| FadError::Parse { line: 1, message: format!("missing '{LABEL_COLUMN}' column") })?;
        let feature_names: Vec<String> =
            headers.iter().enumerate().filter(|(i, _)| *i != label_at).map(|(_, h)| h.trim().to_string()).collect();
        let kinds: Vec<FeatureKind> = feature_names
            .iter()
            .map(|n| sidecar.and_then(|s| s.features.get(n).copied()).unwrap_or_default())
            .collect();
        if let Some(s) = sidecar {
            if let Some(unknown) = s.features.keys().find(|k| !feature_names.contains(k)) {
                return Err(FadError::Config(format!("sidecar names unknown feature '{unknown}'")));
            }
        }

        let mut rows = Vec::new();
        let mut raw_labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let record = record.map_err(|e| FadError::Parse { line, message: e.to_string() })?;
            if record.len() != headers.len() {
                return Err(FadError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            let mut row = Vec::with_capacity(feature_names.len());
            for (j, field) in record.iter().enumerate() {
                if j == label_at {
                    continue;
                }
                let value: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| FadError::Parse { line, message: format!("'{field}' is not a number") })?;
                if !value.is_finite() {
                    return Err(FadError::Parse { line, message: format!("non-finite value '{field}'") });
                }
                let kind = kinds[row.len()];
                if kind == FeatureKind::Binary && value != 0.0 && value != 1.0 {
                    return Err(FadError::Parse {
                        line,
                        message: format!("binary feature '{}' has value {value}", feature_names[row.len()]),
                    });
                }
                row.push(value);
            }
            let label = record[label_at].trim().to_string();
            if label.is_empty() {
                return Err(FadError::Parse { line, message: "empty label".into() });
            }
            rows.push(row);
            raw_labels.push((label, line));
        }

        let class_names = match sidecar.and_then(|s| s.classes.clone()) {
            Some(classes) => classes,
            None => infer_class_order(raw_labels.iter().map(|(l, _)| l.as_str())),
        };
        let labels = raw_labels
            .iter()
            .map(|(l, line)| {
                class_names
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| FadError::Parse { line: *line, message: format!("unknown class '{l}'") })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, kinds, labels, feature_names, class_names)
    }

    pub fn to_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header).map_err(csv_io)?;
        for (row, &y) in self.rows.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(self.class_names[y].clone());
            w.write_record(&fields).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> FadError {
    FadError::Io(std::io::Error::other(e))
}

/// Numeric labels sort numerically, anything else lexicographically.
fn infer_class_order<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut distinct: Vec<String> = labels.map(str::to_string).collect();
    distinct.sort();
    distinct.dedup();
    if distinct.iter().all(|l| l.parse::<i64>().is_ok()) {
        distinct.sort_by_key(|l| l.parse::<i64>().unwrap());
    }
    distinct
}

/// Per-feature standardisation fitted on training rows. Binary features
/// pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub kinds: Vec<FeatureKind>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], kinds: &[FeatureKind]) -> Result<Self> {
        if rows.is_empty() {
            return Err(FadError::Config("cannot fit a standardizer on zero rows".into()));
        }
        let n = rows.len() as f64;
        let mut means = Vec::with_capacity(kinds.len());
        let mut scales = Vec::with_capacity(kinds.len());
        for (j, kind) in kinds.iter().enumerate() {
            if *kind == FeatureKind::Binary {
                means.push(0.0);
                scales.push(1.0);
                continue;
            }
            let mean = crate::numeric::exact_sum(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()) / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            means.push(mean);
            scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Ok(Self { means, scales, kinds: kinds.to_vec() })
    }

    pub fn identity(kinds: &[FeatureKind]) -> Self {
        Self { means: vec![0.0; kinds.len()], scales: vec![1.0; kinds.len()], kinds: kinds.to_vec() }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.means.iter().zip(&self.scales)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}
