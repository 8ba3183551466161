use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Standardizer, TabularDataset};
use super::folds::assign_folds;
use super::metrics::{classification_metrics, ClassMetrics};
use crate::attribution::{
    integrated_gradients, make_baseline, shapley_auto, shapley_exact_limited, shapley_sampled, BaselineVector,
    ImportanceRanking, DEFAULT_EXACT_LIMIT, DEFAULT_IG_STEPS, DEFAULT_PERMUTATIONS,
};
use crate::error::{FadError, Result};
use crate::fadcurve::{correct_counts, curve_from_counts, CurvePoint, DropSchedule, FadCurve, DEFAULT_BETA};
use crate::nncore::{train, DenseNetwork, GradientTarget, LabeledSlice, NetworkSpec, TrainConfig};
use crate::numeric::derive_seed;
use crate::report::NaucReport;

const TAG_FOLDS: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_VALIDATION: u64 = 3;
const TAG_SHAPLEY: u64 = 4;
const TAG_RANDOM: u64 = 5;

/// Attribution methods compared by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ig,
    /// Exact when the input is narrow enough, sampled otherwise.
    Shapley,
    ShapleyExact,
    ShapleySampled,
    /// Ground-truth informative features first (synthetic data only).
    Oracle,
    /// Uniformly random scores, a per-instance random ranking.
    Random,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Ig => "IG",
            Method::Shapley => "Shapley",
            Method::ShapleyExact => "Shapley-exact",
            Method::ShapleySampled => "Shapley-sampled",
            Method::Oracle => "Oracle",
            Method::Random => "Random",
        }
    }
}

impl FromStr for Method {
    type Err = FadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ig" | "integrated-gradients" => Ok(Method::Ig),
            "shapley" => Ok(Method::Shapley),
            "shapley-exact" => Ok(Method::ShapleyExact),
            "shapley-sampled" => Ok(Method::ShapleySampled),
            "oracle" => Ok(Method::Oracle),
            "random" => Ok(Method::Random),
            other => Err(FadError::Config(format!("unknown attribution method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMode {
    /// Each instance is dropped in its own attribution order.
    #[default]
    PerInstance,
    /// One order per class and fold, by mean `|score|` over the class.
    ClassGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// All test-fold instances pooled, each scored by its own fold's model.
    #[default]
    Pooled,
    /// Pointwise mean of the per-fold curves.
    FoldAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineChoice {
    /// Training means for continuous features, 0 for binary ones.
    #[default]
    Mean,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionTarget {
    /// Explain the score of the instance's true class (the class whose
    /// curve the instance contributes to).
    #[default]
    TrueClass,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FadConfig {
    pub folds: usize,
    pub beta: f64,
    pub methods: Vec<Method>,
    pub baseline: BaselineChoice,
    pub ig_steps: usize,
    pub permutations: u64,
    pub exact_limit: usize,
    pub ranking: RankingMode,
    pub aggregation: Aggregation,
    /// Share of each training fold held out for model selection.
    pub validation_fraction: f64,
    pub hidden: Vec<usize>,
    pub gradient_target: GradientTarget,
    pub target: AttributionTarget,
    pub seed: u64,
    /// Informative feature indices, required by [`Method::Oracle`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<usize>>,
}

impl Default for FadConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            beta: DEFAULT_BETA,
            methods: vec![Method::Ig, Method::Shapley],
            baseline: BaselineChoice::Mean,
            ig_steps: DEFAULT_IG_STEPS,
            permutations: DEFAULT_PERMUTATIONS,
            exact_limit: DEFAULT_EXACT_LIMIT,
            ranking: RankingMode::PerInstance,
            aggregation: Aggregation::Pooled,
            validation_fraction: 0.1,
            hidden: vec![32, 16, 8],
            gradient_target: GradientTarget::Probability,
            target: AttributionTarget::TrueClass,
            seed: 0,
            ground_truth: None,
        }
    }
}

impl FadConfig {
    pub fn validate(&self, dataset: &TabularDataset) -> Result<()> {
        if self.methods.is_empty() {
            return Err(FadError::Config("method list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.methods.iter().find(|m| !seen.insert(m.label())) {
            return Err(FadError::Config(format!("method {} listed twice", dup.label())));
        }
        if !(self.beta > 0.0 && self.beta <= 100.0) {
            return Err(FadError::Config(format!("beta {} must lie in (0, 100]", self.beta)));
        }
        if self.ig_steps == 0 || self.permutations == 0 {
            return Err(FadError::Config("ig_steps and permutations must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(FadError::Config(format!("validation fraction {} outside [0, 0.5)", self.validation_fraction)));
        }
        if self.methods.contains(&Method::Oracle) {
            let truth = self
                .ground_truth
                .as_ref()
                .ok_or_else(|| FadError::Config("oracle method needs ground-truth informative features".into()))?;
            if let Some(bad) = truth.iter().find(|&&j| j >= dataset.feature_count()) {
                return Err(FadError::Index(format!("ground-truth feature {bad} out of range")));
            }
        }
        if self.methods.contains(&Method::ShapleyExact) && dataset.feature_count() > self.exact_limit {
            return Err(FadError::Config(format!(
                "{} features exceed the exact Shapley limit of {}; use shapley or shapley-sampled",
                dataset.feature_count(),
                self.exact_limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub selected_epoch: usize,
    pub final_train_loss: Option<f64>,
    pub best_validation_loss: Option<f64>,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAttribution {
    pub instance: usize,
    pub fold: usize,
    pub method: String,
    pub label: usize,
    pub predicted: usize,
    pub target_class: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FadAnalysis {
    pub report: NaucReport,
    /// Curves used for the report (pooled or fold-averaged), one per class and method.
    pub curves: Vec<FadCurve>,
    pub fold_curves: Vec<FadCurve>,
    pub metrics: ClassMetrics,
    pub fold_metrics: Vec<ClassMetrics>,
    pub folds: Vec<FoldSummary>,
    #[serde(skip)]
    pub attributions: Vec<InstanceAttribution>,
}

struct FoldOutput {
    test: Vec<usize>,
    predictions: Vec<usize>,
    /// `counts[method][class]`, `None` when the class is absent from the fold.
    counts: Vec<Vec<Option<Vec<usize>>>>,
    class_sizes: Vec<usize>,
    attributions: Vec<InstanceAttribution>,
    summary: FoldSummary,
}

/// Cross-validated FAD analysis.
///
/// For every fold: standardise on the training part, train with
/// lowest-validation-loss selection, attribute every test instance with each
/// method, and count how many instances of each class keep their class while
/// their top features are dropped. Curves are then pooled (or averaged)
/// across folds and scored on `[0, beta]`, normalising each class by the
/// largest curve value among the compared methods.
///
/// Every random choice uses a seed derived from `fad.seed`, so the result
/// does not depend on the rayon thread count.
pub fn run_fad_analysis(dataset: &TabularDataset, train_config: &TrainConfig, fad: &FadConfig) -> Result<FadAnalysis> {
    fad.validate(dataset)?;
    train_config.validate()?;
    let class_count = dataset.class_count();
    if class_count < 2 {
        return Err(FadError::Config("FAD analysis needs at least two classes".into()));
    }
    let d = dataset.feature_count();
    let schedule = DropSchedule::with_tail(d, fad.beta)?;
    let plan = assign_folds(dataset.labels(), class_count, fad.folds, derive_seed(fad.seed, &[TAG_FOLDS]))?;

    let outputs: Vec<FoldOutput> = (0..fad.folds)
        .into_par_iter()
        .map(|fold| run_fold(dataset, train_config, fad, &plan.train_indices(fold), plan.test_indices(fold), fold, &schedule))
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<usize> = dataset.labels().to_vec();
    let mut pooled_pred = vec![0usize; dataset.len()];
    for out in &outputs {
        for (&i, &p) in out.test.iter().zip(&out.predictions) {
            pooled_pred[i] = p;
        }
    }
    let metrics = classification_metrics(&pooled_pred, &labels, class_count)?;
    let fold_metrics = outputs
        .iter()
        .filter(|o| !o.test.is_empty())
        .map(|o| {
            let y: Vec<usize> = o.test.iter().map(|&i| labels[i]).collect();
            classification_metrics(&o.predictions, &y, class_count)
        })
        .collect::<Result<Vec<_>>>()?;

    let method_labels: Vec<&str> = fad.methods.iter().map(Method::label).collect();
    let mut fold_curves = Vec::new();
    for (fold, out) in outputs.iter().enumerate() {
        for class in 0..class_count {
            for (m, label) in method_labels.iter().enumerate() {
                if let Some(counts) = &out.counts[m][class] {
                    fold_curves.push(curve_from_counts(
                        counts,
                        out.class_sizes[class],
                        &schedule,
                        class,
                        &dataset.class_names()[class],
                        label,
                        Some(fold),
                    )?);
                }
            }
        }
    }

    let mut curves = Vec::new();
    let mut per_class = Vec::new();
    for class in 0..class_count {
        let name = &dataset.class_names()[class];
        let total: usize = outputs.iter().map(|o| o.class_sizes[class]).sum();
        if total == 0 {
            per_class.push((class, name.clone(), 0, Vec::new()));
            continue;
        }
        let mut class_curves = Vec::with_capacity(method_labels.len());
        for (m, label) in method_labels.iter().enumerate() {
            let curve = match fad.aggregation {
                Aggregation::Pooled => {
                    let mut sum = vec![0usize; schedule.counts().len()];
                    for c in outputs.iter().filter_map(|o| o.counts[m][class].as_ref()) {
                        sum.iter_mut().zip(c).for_each(|(s, v)| *s += v);
                    }
                    curve_from_counts(&sum, total, &schedule, class, name, label, None)?
                }
                Aggregation::FoldAverage => {
                    let members: Vec<&FadCurve> = fold_curves
                        .iter()
                        .filter(|c| c.class == class && c.method == *label)
                        .collect();
                    average_curves(&members, class, name, label, total)?
                }
            };
            class_curves.push(curve);
        }
        curves.extend(class_curves.iter().cloned());
        per_class.push((class, name.clone(), total, class_curves));
    }

    let report = NaucReport::from_class_curves(
        fad.beta,
        &method_labels,
        match fad.aggregation {
            Aggregation::Pooled => "pooled",
            Aggregation::FoldAverage => "fold-average",
        },
        &per_class,
    );

    let folds = outputs.iter().map(|o| o.summary.clone()).collect();
    let attributions = outputs.into_iter().flat_map(|o| o.attributions).collect();
    Ok(FadAnalysis { report, curves, fold_curves, metrics, fold_metrics, folds, attributions })
}

fn average_curves(members: &[&FadCurve], class: usize, name: &str, method: &str, total: usize) -> Result<FadCurve> {
    let first = members.first().ok_or_else(|| FadError::Degenerate(format!("no fold curves for {name}")))?;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| CurvePoint {
            percent: p.percent,
            metric: members.iter().map(|c| c.points[k].metric).sum::<f64>() / members.len() as f64,
        })
        .collect();
    FadCurve::new(points, class, name, method, None, total)
}

/// Holds out `fraction` of every class (at least one instance stays in
/// training). Returns sorted `(train, validation)` index lists.
pub fn validation_split(indices: &[usize], labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 {
        return (indices.to_vec(), Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_class = indices.iter().map(|&i| labels[i]).max().unwrap_or(0);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..=max_class {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let take = ((fraction * members.len() as f64).round() as usize).min(members.len() - 1);
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn run_fold(
    dataset: &TabularDataset,
    train_config: &TrainConfig,
    fad: &FadConfig,
    train_idx: &[usize],
    test: Vec<usize>,
    fold: usize,
    schedule: &DropSchedule,
) -> Result<FoldOutput> {
    let labels = dataset.labels();
    let class_count = dataset.class_count();
    let d = dataset.feature_count();
    let train_rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| dataset.rows()[i].clone()).collect();
    let scaler = Standardizer::fit(&train_rows, dataset.kinds())?;

    let (fit_idx, val_idx) =
        validation_split(train_idx, labels, fad.validation_fraction, derive_seed(fad.seed, &[TAG_VALIDATION, fold as u64]));
    let fit_x: Vec<Vec<f64>> = fit_idx.iter().map(|&i| scaler.apply(&dataset.rows()[i])).collect();
    let fit_y: Vec<usize> = fit_idx.iter().map(|&i| labels[i]).collect();
    let val_x: Vec<Vec<f64>> = val_idx.iter().map(|&i| scaler.apply(&dataset.rows()[i])).collect();
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let spec = NetworkSpec::new(d, fad.hidden.clone(), class_count);
    let cfg = TrainConfig { seed: derive_seed(fad.seed, &[TAG_TRAIN, fold as u64]), ..train_config.clone() };
    let validation = if val_x.is_empty() { None } else { Some(LabeledSlice::new(&val_x, &val_y)?) };
    let outcome = train(LabeledSlice::new(&fit_x, &fit_y)?, validation, &spec, &cfg)?;
    let net = outcome.network.with_gradient_target(fad.gradient_target);

    let baseline = match fad.baseline {
        BaselineChoice::Mean => make_baseline(&scaler.apply_all(&train_rows), dataset.kinds())?,
        BaselineChoice::Zero => BaselineVector::zeros(d),
    };

    let test_x: Vec<Vec<f64>> = test.iter().map(|&i| scaler.apply(&dataset.rows()[i])).collect();
    let predictions: Vec<usize> = test_x.iter().map(|x| net.predict(x)).collect::<Result<_>>()?;
    let targets: Vec<usize> = match fad.target {
        AttributionTarget::TrueClass => test.iter().map(|&i| labels[i]).collect(),
        AttributionTarget::Predicted => predictions.clone(),
    };

    let mut class_sizes = vec![0usize; class_count];
    for &i in &test {
        class_sizes[labels[i]] += 1;
    }

    let mut counts = Vec::with_capacity(fad.methods.len());
    let mut attributions = Vec::new();
    for method in &fad.methods {
        let scores: Vec<Vec<f64>> = (0..test.len())
            .into_par_iter()
            .map(|pos| attribute(&net, &test_x[pos], &baseline, targets[pos], test[pos], *method, fad))
            .collect::<Result<_>>()?;

        let rankings: Vec<ImportanceRanking> = match fad.ranking {
            RankingMode::PerInstance => scores.iter().map(|s| ImportanceRanking::from_scores(s)).collect(),
            RankingMode::ClassGlobal => {
                let mut global = vec![vec![0.0; d]; class_count];
                for (pos, s) in scores.iter().enumerate() {
                    let c = labels[test[pos]];
                    for (g, v) in global[c].iter_mut().zip(s) {
                        *g += v.abs() / class_sizes[c] as f64;
                    }
                }
                let by_class: Vec<ImportanceRanking> = global.iter().map(|g| ImportanceRanking::from_scores(g)).collect();
                test.iter().map(|&i| by_class[labels[i]].clone()).collect()
            }
        };

        let mut per_class = vec![None; class_count];
        for (class, slot) in per_class.iter_mut().enumerate() {
            let members: Vec<usize> = (0..test.len()).filter(|&p| labels[test[p]] == class).collect();
            if members.is_empty() {
                continue;
            }
            let xs: Vec<Vec<f64>> = members.iter().map(|&p| test_x[p].clone()).collect();
            let rs: Vec<ImportanceRanking> = members.iter().map(|&p| rankings[p].clone()).collect();
            *slot = Some(correct_counts(&net, &xs, &rs, &baseline, class, schedule)?);
        }
        counts.push(per_class);

        attributions.extend(scores.into_iter().enumerate().map(|(pos, s)| InstanceAttribution {
            instance: test[pos],
            fold,
            method: method.label().to_string(),
            label: labels[test[pos]],
            predicted: predictions[pos],
            target_class: targets[pos],
            scores: s,
        }));
    }

    let correct = test.iter().zip(&predictions).filter(|(&i, &p)| labels[i] == p).count();
    let summary = FoldSummary {
        fold,
        train_size: fit_idx.len(),
        validation_size: val_idx.len(),
        test_size: test.len(),
        selected_epoch: outcome.selected_epoch,
        final_train_loss: outcome.trace.last().map(|e| e.train_loss),
        best_validation_loss: outcome
            .trace
            .iter()
            .filter_map(|e| e.validation_loss)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
        test_accuracy: if test.is_empty() { 0.0 } else { correct as f64 / test.len() as f64 },
    };
    Ok(FoldOutput { test, predictions, counts, class_sizes, attributions, summary })
}

fn attribute(
    net: &DenseNetwork,
    x: &[f64],
    baseline: &BaselineVector,
    target: usize,
    instance: usize,
    method: Method,
    fad: &FadConfig,
) -> Result<Vec<f64>> {
    let shapley_seed = derive_seed(fad.seed, &[TAG_SHAPLEY, instance as u64]);
    Ok(match method {
        Method::Ig => integrated_gradients(net, x, baseline, target, fad.ig_steps)?.scores,
        Method::Shapley => {
            shapley_auto(net, x, baseline, target, fad.exact_limit, fad.permutations, shapley_seed)?.scores
        }
        Method::ShapleyExact => shapley_exact_limited(net, x, baseline, target, fad.exact_limit)?.scores,
        Method::ShapleySampled => shapley_sampled(net, x, baseline, target, fad.permutations, shapley_seed)?.scores,
        Method::Oracle => {
            let mut s = vec![0.0; x.len()];
            for &j in fad.ground_truth.as_deref().unwrap_or_default() {
                s[j] = 1.0;
            }
            s
        }
        Method::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(fad.seed, &[TAG_RANDOM, instance as u64]));
            (0..x.len()).map(|_| rng.random::<f64>()).collect()
        }
    })
}

/// Per method, the share of correctly classified instances whose mean
/// `|attribution|` over `informative` exceeds the mean over the other
/// features. Returns `(method, share, instances)`.
pub fn informative_separation(analysis: &FadAnalysis, informative: &[usize]) -> Vec<(String, f64, usize)> {
    let mut methods: Vec<&str> = Vec::new();
    for a in &analysis.attributions {
        if !methods.contains(&a.method.as_str()) {
            methods.push(&a.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let mut hits = 0usize;
            let mut total = 0usize;
            for a in analysis.attributions.iter().filter(|a| a.method == m && a.label == a.predicted) {
                let d = a.scores.len();
                let mut mask = vec![false; d];
                informative.iter().filter(|&&j| j < d).for_each(|&j| mask[j] = true);
                let (mut inf, mut noise, mut n_inf) = (0.0, 0.0, 0usize);
                for (j, s) in a.scores.iter().enumerate() {
                    if mask[j] {
                        inf += s.abs();
                        n_inf += 1;
                    } else {
                        noise += s.abs();
                    }
                }
                if n_inf == 0 || n_inf == d {
                    continue;
                }
                total += 1;
                if inf / n_inf as f64 > noise / (d - n_inf) as f64 {
                    hits += 1;
                }
            }
            let share = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
            (m.to_string(), share, total)
        })
        .collect()
}
