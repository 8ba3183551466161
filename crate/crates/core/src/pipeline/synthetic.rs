use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use crate::attribution::FeatureKind;
use crate::error::{FadError, Result};

/// Settings for a "vital few" dataset: class signal lives only in a small
/// subset of the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VitalFewConfig {
    pub instances: usize,
    pub features: usize,
    pub informative_fraction: f64,
    pub classes: usize,
    /// Standard deviation of class centres on each informative feature,
    /// relative to the unit noise.
    pub separation: f64,
    pub seed: u64,
}

impl Default for VitalFewConfig {
    fn default() -> Self {
        Self { instances: 500, features: 50, informative_fraction: 0.2, classes: 3, separation: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: TabularDataset,
    /// Ground-truth informative feature indices, ascending.
    pub informative: Vec<usize>,
    /// `centres[class][feature]`; zero on noise features.
    pub centres: Vec<Vec<f64>>,
}

/// Balanced classes; each informative feature has class-dependent means
/// (centred across classes), every feature carries unit Gaussian noise.
pub fn generate_vital_few(config: &VitalFewConfig) -> Result<SyntheticDataset> {
    let VitalFewConfig { instances, features, informative_fraction, classes, separation, seed } = *config;
    if !(informative_fraction > 0.0 && informative_fraction < 1.0) {
        return Err(FadError::Config(format!("informative fraction {informative_fraction} must lie in (0, 1)")));
    }
    if classes < 2 || instances < classes || features == 0 {
        return Err(FadError::Config(format!("need >= 2 classes, >= 1 instance per class and >= 1 feature: {config:?}")));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(FadError::Config(format!("separation {separation} must be positive")));
    }
    let informative_count = (informative_fraction * features as f64).round() as usize;
    if informative_count == 0 {
        return Err(FadError::Config(format!(
            "{informative_fraction} of {features} features leaves no informative feature"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut informative = index::sample(&mut rng, features, informative_count).into_vec();
    informative.sort_unstable();

    let mut centres = vec![vec![0.0; features]; classes];
    for &j in &informative {
        let draws: Vec<f64> = (0..classes)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                separation * z
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / classes as f64;
        for (c, v) in draws.into_iter().enumerate() {
            centres[c][j] = v - mean;
        }
    }

    let mut labels: Vec<usize> = (0..instances).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let rows = labels
        .iter()
        .map(|&y| {
            centres[y]
                .iter()
                .map(|mu| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    mu + noise
                })
                .collect()
        })
        .collect();

    let dataset = TabularDataset::new(
        rows,
        vec![FeatureKind::Continuous; features],
        labels,
        (0..features).map(|j| format!("f{j:03}")).collect(),
        (0..classes).map(|c| format!("class_{c}")).collect(),
    )?;
    Ok(SyntheticDataset { dataset, informative, centres })
}
