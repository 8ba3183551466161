use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{DenseNetwork, Gradients, NetworkSpec};
use crate::error::{FadError, Result};

/// Optimiser and schedule settings. Defaults follow the diagnosis model:
/// Adam(1e-3, 0.9, 0.999, 1e-8), batch 32, 100 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, batch_size: 32, epochs: 100, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0;
        if ok {
            Ok(())
        } else {
            Err(FadError::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Borrowed rows and labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSlice<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> LabeledSlice<'a> {
    pub fn new(rows: &'a [Vec<f64>], labels: &'a [usize]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(FadError::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        Ok(Self { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: DenseNetwork,
    pub trace: Vec<EpochLoss>,
    /// Epoch whose parameters were kept (0 = initialisation).
    pub selected_epoch: usize,
}

/// Mini-batch Adam on mean cross-entropy.
///
/// Each epoch reshuffles the training order with the seeded RNG and keeps the
/// trailing short batch. With a validation split the snapshot with the lowest
/// validation loss is returned, otherwise the final parameters.
pub fn train(
    data: LabeledSlice<'_>,
    validation: Option<LabeledSlice<'_>>,
    spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(FadError::Config("training set is empty".into()));
    }
    if let Some(v) = validation {
        if v.is_empty() {
            return Err(FadError::Config("validation split is empty".into()));
        }
    }
    let mut seen = vec![false; spec.class_count];
    for &y in data.labels {
        if y >= spec.class_count {
            return Err(FadError::Index(format!("label {y} out of range for {} classes", spec.class_count)));
        }
        seen[y] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        log::warn!("class {missing} has no training instances");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = DenseNetwork::initialize(spec, config.seed)?;
    let mut state = AdamState::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    let mut best = match validation {
        Some(v) => Some((net.mean_loss(v.rows, v.labels)?, net.clone(), 0usize)),
        None => None,
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.fill_zero();
            for &i in batch {
                epoch_loss += net.accumulate_loss_gradient(&data.rows[i], data.labels[i], &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut net, &mut state, &grads, config)?;
        }
        let train_loss = epoch_loss / data.len() as f64;
        if !train_loss.is_finite() {
            return Err(FadError::Divergence { epoch, detail: format!("training loss is {train_loss}") });
        }
        let finite = net
            .layers()
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(FadError::Divergence { epoch, detail: "parameters are no longer finite".into() });
        }
        let validation_loss = match validation {
            Some(v) => {
                let loss = net.mean_loss(v.rows, v.labels)?;
                if !loss.is_finite() {
                    return Err(FadError::Divergence { epoch, detail: format!("validation loss is {loss}") });
                }
                if let Some((best_loss, snapshot, at)) = best.as_mut() {
                    if loss < *best_loss {
                        *best_loss = loss;
                        *snapshot = net.clone();
                        *at = epoch;
                    }
                }
                Some(loss)
            }
            None => None,
        };
        trace.push(EpochLoss { epoch, train_loss, validation_loss });
    }

    let (network, selected_epoch) = match best {
        Some((_, snapshot, at)) => (snapshot, at),
        None => (net, config.epochs),
    };
    Ok(TrainOutcome { network, trace, selected_epoch })
}
