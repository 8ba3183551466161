use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};
use crate::numeric::ExactSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    Continuous,
    /// Indicator features; absence is 0.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselinePolicy {
    Mean,
    Zero,
    Custom,
}

/// Per-feature values representing "absence".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineVector {
    values: Vec<f64>,
    policies: Vec<BaselinePolicy>,
}

impl BaselineVector {
    /// Verbatim override; every feature is tagged custom.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        let policies = vec![BaselinePolicy::Custom; values.len()];
        Ok(Self { values, policies })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim], policies: vec![BaselinePolicy::Zero; dim] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn policies(&self) -> &[BaselinePolicy] {
        &self.policies
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.values.len() != dim {
            return Err(FadError::Shape(format!("baseline has {} features, expected {dim}", self.values.len())));
        }
        Ok(())
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FadError::Domain(format!("baseline feature {i} is not finite")));
    }
    Ok(())
}

/// Continuous features take their training mean, binary indicators take 0.
pub fn make_baseline(rows: &[Vec<f64>], kinds: &[FeatureKind]) -> Result<BaselineVector> {
    if rows.is_empty() {
        return Err(FadError::Config("baseline needs at least one training row".into()));
    }
    let dim = kinds.len();
    if let Some(r) = rows.iter().position(|r| r.len() != dim) {
        return Err(FadError::Shape(format!("row {r} has {} features, expected {dim}", rows[r].len())));
    }
    let mut values = Vec::with_capacity(dim);
    let mut policies = Vec::with_capacity(dim);
    for (j, kind) in kinds.iter().enumerate() {
        match kind {
            FeatureKind::Continuous => {
                let mut acc = ExactSum::new();
                acc.extend(rows.iter().map(|r| r[j]));
                values.push(acc.value() / rows.len() as f64);
                policies.push(BaselinePolicy::Mean);
            }
            FeatureKind::Binary => {
                values.push(0.0);
                policies.push(BaselinePolicy::Zero);
            }
        }
    }
    check_finite(&values)?;
    Ok(BaselineVector { values, policies })
}
