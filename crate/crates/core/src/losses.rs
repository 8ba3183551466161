//! Intent cross-entropy, masked sequence negative log-likelihood and the
//! interpolated joint loss used for joint intent classification and tagging.

use crate::error::{FadError, Result};

/// Probabilities below this are floored before taking the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Default interpolation weight between the intent and tagging losses.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Loss value plus whether the probability floor had to be applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub floored: bool,
}

/// Softmax output over intent classes with its one-hot label.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentPrediction {
    probs: Vec<f64>,
    label: usize,
}

impl IntentPrediction {
    pub fn new(probs: Vec<f64>, label: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(FadError::Shape("intent prediction has no classes".into()));
        }
        if label >= probs.len() {
            return Err(FadError::Index(format!("label {label} out of range for {} classes", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(FadError::Domain("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FadError::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs, label })
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn one_hot(&self) -> Vec<f64> {
        (0..self.probs.len()).map(|i| if i == self.label { 1.0 } else { 0.0 }).collect()
    }
}

/// Per-token log-probabilities, targets and a pad mask (`true` = counted).
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePrediction {
    token_log_probs: Vec<Vec<f64>>,
    token_labels: Vec<usize>,
    mask: Vec<bool>,
}

impl SequencePrediction {
    pub fn new(token_log_probs: Vec<Vec<f64>>, token_labels: Vec<usize>, mask: Vec<bool>) -> Result<Self> {
        if token_log_probs.len() != token_labels.len() || token_labels.len() != mask.len() {
            return Err(FadError::Shape(format!(
                "sequence lengths differ: {} log-prob rows, {} labels, {} mask entries",
                token_log_probs.len(),
                token_labels.len(),
                mask.len()
            )));
        }
        for (j, (row, &label)) in token_log_probs.iter().zip(&token_labels).enumerate() {
            if label >= row.len() {
                return Err(FadError::Index(format!("token {j}: label {label} out of range")));
            }
            if !mask[j] {
                continue;
            }
            let lse = log_sum_exp(row);
            if !lse.is_finite() || lse.abs() > 1e-6 {
                return Err(FadError::Domain(format!("token {j}: log-probabilities are not normalised")));
            }
        }
        Ok(Self { token_log_probs, token_labels, mask })
    }

    /// Number of tokens that count toward the loss.
    pub fn effective_len(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn target_log_prob(&self, token: usize) -> f64 {
        self.token_log_probs[token][self.token_labels[token]]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Replaces the log-probabilities of one token; used to probe masking.
    pub fn set_token_log_probs(&mut self, token: usize, row: Vec<f64>) {
        self.token_log_probs[token] = row;
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `-sum_i y_i log p_i`, i.e. `-log p[label]`.
pub fn intent_ce_loss(pred: &IntentPrediction) -> LossValue {
    let p = pred.probs[pred.label];
    let floored = p < PROBABILITY_FLOOR;
    if floored {
        log::warn!("probability {p} at the true intent class floored to {PROBABILITY_FLOOR}");
    }
    let value = -p.max(PROBABILITY_FLOOR).ln();
    // -ln(1) is -0.0; report a clean zero.
    LossValue { value: value.max(0.0), floored }
}

/// Gradient of [`intent_ce_loss`] with respect to each class probability.
pub fn intent_ce_gradient(pred: &IntentPrediction) -> Vec<f64> {
    let p = pred.probs[pred.label].max(PROBABILITY_FLOOR);
    (0..pred.probs.len()).map(|i| if i == pred.label { -1.0 / p } else { 0.0 }).collect()
}

/// Mean target negative log-likelihood over unmasked tokens.
pub fn masked_ner_nll(pred: &SequencePrediction) -> Result<LossValue> {
    let m = pred.effective_len();
    if m == 0 {
        return Err(FadError::Degenerate("every token is masked".into()));
    }
    let mut total = 0.0;
    let mut floored = false;
    for (j, _) in pred.mask.iter().enumerate().filter(|(_, keep)| **keep) {
        let lp = pred.target_log_prob(j);
        let bounded = if lp < PROBABILITY_FLOOR.ln() {
            floored = true;
            PROBABILITY_FLOOR.ln()
        } else {
            lp
        };
        total += bounded;
    }
    if floored {
        log::warn!("token log-probabilities below ln({PROBABILITY_FLOOR}) were floored");
    }
    Ok(LossValue { value: (-total / m as f64).max(0.0), floored })
}

/// Gradient of [`masked_ner_nll`] with respect to every token's target
/// log-probability (zero at masked positions).
pub fn masked_ner_gradient(pred: &SequencePrediction) -> Result<Vec<f64>> {
    let m = pred.effective_len();
    if m == 0 {
        return Err(FadError::Degenerate("every token is masked".into()));
    }
    Ok(pred.mask.iter().map(|&keep| if keep { -1.0 / m as f64 } else { 0.0 }).collect())
}

/// `alpha * intent + (1 - alpha) * tagging`.
pub fn joint_loss(intent: f64, tagging: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FadError::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    if alpha == 1.0 {
        return Ok(intent);
    }
    if alpha == 0.0 {
        return Ok(tagging);
    }
    Ok(alpha * intent + (1.0 - alpha) * tagging)
}
