use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// The class was never predicted, so precision is reported as 0.
    pub no_predictions: bool,
}

/// Per-class precision/recall/F1 with support-weighted averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub rows: Vec<ClassRow>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub support: usize,
}

/// Classes that never occur in `labels` get no row.
pub fn classification_metrics(predictions: &[usize], labels: &[usize], class_count: usize) -> Result<ClassMetrics> {
    if predictions.len() != labels.len() {
        return Err(FadError::Shape(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(FadError::Degenerate("no predictions to score".into()));
    }
    if let Some(bad) = predictions.iter().chain(labels).find(|&&c| c >= class_count) {
        return Err(FadError::Index(format!("class {bad} beyond {class_count} classes")));
    }
    let mut tp = vec![0usize; class_count];
    let mut predicted = vec![0usize; class_count];
    let mut support = vec![0usize; class_count];
    for (&p, &y) in predictions.iter().zip(labels) {
        predicted[p] += 1;
        support[y] += 1;
        if p == y {
            tp[y] += 1;
        }
    }
    let rows: Vec<ClassRow> = (0..class_count)
        .filter(|&c| support[c] > 0)
        .map(|c| {
            let precision = if predicted[c] == 0 { 0.0 } else { tp[c] as f64 / predicted[c] as f64 };
            let recall = tp[c] as f64 / support[c] as f64;
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassRow { class: c, precision, recall, f1, support: support[c], no_predictions: predicted[c] == 0 }
        })
        .collect();
    let n = labels.len() as f64;
    let weighted = |f: fn(&ClassRow) -> f64| rows.iter().map(|r| f(r) * r.support as f64).sum::<f64>() / n;
    Ok(ClassMetrics {
        weighted_precision: weighted(|r| r.precision),
        weighted_recall: weighted(|r| r.recall),
        weighted_f1: weighted(|r| r.f1),
        accuracy: tp.iter().sum::<usize>() as f64 / n,
        support: labels.len(),
        rows,
    })
}
