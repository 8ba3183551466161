//! Datasets, cross-validation and the end-to-end FAD analysis.

mod analysis;
mod dataset;
mod folds;
mod metrics;
mod synthetic;

pub use analysis::{
    informative_separation, run_fad_analysis, validation_split, Aggregation, AttributionTarget, BaselineChoice, FadAnalysis, FadConfig, FoldSummary,
    InstanceAttribution, Method, RankingMode,
};
pub use dataset::{DatasetSidecar, Standardizer, TabularDataset};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{classification_metrics, ClassMetrics, ClassRow};
pub use synthetic::{generate_vital_few, SyntheticDataset, VitalFewConfig};
