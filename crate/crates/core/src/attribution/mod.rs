//! Feature attribution: baselines, integrated gradients, Shapley values and
//! importance rankings.
//!
//! Every method explains the scalar selected by the network's
//! [`GradientTarget`](crate::nncore::GradientTarget): the target-class
//! probability by default, or its logit. "Absent" features take the values
//! of a single [`BaselineVector`], shared with FAD dropping.

mod baseline;
mod ig;
mod ranking;
mod shapley;

use serde::{Deserialize, Serialize};

pub use baseline::{make_baseline, BaselinePolicy, BaselineVector, FeatureKind};
pub use ig::{integrated_gradients, DEFAULT_IG_STEPS};
pub use ranking::{importance_ranking, ImportanceRanking, TIE_BREAK_RULE};
pub use shapley::{
    shapley_auto, shapley_exact, shapley_exact_limited, shapley_permutations_exhaustive, shapley_sampled, DEFAULT_EXACT_LIMIT,
    DEFAULT_PERMUTATIONS, EXHAUSTIVE_LIMIT,
};

use crate::nncore::GradientTarget;

/// Which estimator produced an attribution vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    IntegratedGradients,
    ShapleyExact,
    ShapleySampled,
    ShapleyExhaustive,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::IntegratedGradients => "integrated-gradients",
            MethodTag::ShapleyExact => "shapley-exact",
            MethodTag::ShapleySampled => "shapley-sampled",
            MethodTag::ShapleyExhaustive => "shapley-exhaustive",
        }
    }
}

/// Estimator settings and diagnostics carried with a result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributionMeta {
    pub target: GradientTarget,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `|sum(scores) - (F(x) - F(baseline))|`.
    pub completeness_gap: f64,
    /// `F(x) - F(baseline)`.
    pub score_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
    /// Set when the caller asked for "Shapley" and the mode was chosen by size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto_selected: Option<String>,
}

/// Signed per-feature attribution for one instance and target class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub scores: Vec<f64>,
    pub target_class: usize,
    pub method: MethodTag,
    pub meta: AttributionMeta,
}

impl AttributionVector {
    pub fn dim(&self) -> usize {
        self.scores.len()
    }

    /// `|score_i| / sum_j |score_j|`; all zeros when every score is zero.
    pub fn shares(&self) -> Vec<f64> {
        let total: f64 = self.scores.iter().map(|s| s.abs()).sum();
        if total == 0.0 {
            return vec![0.0; self.scores.len()];
        }
        self.scores.iter().map(|s| s.abs() / total).collect()
    }
}
