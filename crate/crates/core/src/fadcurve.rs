//! Feature Attribution Dropping (FAD) curves and their normalised AUC.
//!
//! A FAD curve tracks a metric (accuracy by default) while the most
//! important features of each instance, by `|attribution|`, are cumulatively
//! replaced by baseline values. Steeper early drops mean the attribution
//! found the features the model actually relies on. The area on
//! `[0, beta]` percent dropped is integrated with the trapezoidal rule and
//! normalised by `beta * max_metric`, where `max_metric` is the largest
//! curve value among all methods compared for the same class.

use serde::{Deserialize, Serialize};

use crate::attribution::{BaselineVector, ImportanceRanking};
use crate::error::{FadError, Result};
use crate::nncore::DenseNetwork;
use crate::numeric::ExactSum;

/// Upper bound of the integrated range, in percent of features dropped.
pub const DEFAULT_BETA: f64 = 20.0;
/// Spacing of the coarse tail of the plotting grid beyond beta.
pub const TAIL_STEP_PERCENT: f64 = 5.0;
pub const ACCURACY: &str = "accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub percent: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadCurve {
    pub points: Vec<CurvePoint>,
    pub class: usize,
    pub class_name: String,
    pub method: String,
    /// `None` for curves pooled over folds.
    pub fold: Option<usize>,
    pub metric_name: String,
    pub instances: usize,
}

impl FadCurve {
    pub fn new(
        points: Vec<CurvePoint>,
        class: usize,
        class_name: impl Into<String>,
        method: impl Into<String>,
        fold: Option<usize>,
        instances: usize,
    ) -> Result<Self> {
        validate_points(&points)?;
        Ok(Self {
            points,
            class,
            class_name: class_name.into(),
            method: method.into(),
            fold,
            metric_name: ACCURACY.to_string(),
            instances,
        })
    }

    /// Metric at `percent`, linearly interpolated between grid points.
    pub fn value_at(&self, percent: f64) -> Option<f64> {
        value_at(&self.points, percent)
    }

    /// Largest metric on `[0, beta]`, including the interpolated value at beta.
    pub fn max_within(&self, beta: f64) -> f64 {
        let mut best = self
            .points
            .iter()
            .filter(|p| p.percent <= beta)
            .map(|p| p.metric)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(v) = self.value_at(beta) {
            best = best.max(v);
        }
        best
    }

    /// Number of grid steps on `[0, beta]` where the metric goes up while
    /// dropping more features (a symptom of correlated features).
    pub fn rises_within(&self, beta: f64) -> usize {
        self.points
            .windows(2)
            .filter(|w| w[1].percent <= beta && w[1].metric > w[0].metric)
            .count()
    }
}

fn validate_points(points: &[CurvePoint]) -> Result<()> {
    let first = points.first().ok_or_else(|| FadError::Degenerate("curve has no points".into()))?;
    if first.percent != 0.0 {
        return Err(FadError::Config(format!("curve must start at 0%, starts at {}", first.percent)));
    }
    for w in points.windows(2) {
        if w[1].percent <= w[0].percent {
            return Err(FadError::Config("curve percents must be strictly increasing".into()));
        }
    }
    for p in points {
        if !(0.0..=100.0).contains(&p.percent) {
            return Err(FadError::Config(format!("percent {} outside [0, 100]", p.percent)));
        }
        if !p.metric.is_finite() || p.metric < 0.0 {
            return Err(FadError::Domain(format!("metric {} must be finite and nonnegative", p.metric)));
        }
    }
    Ok(())
}

fn value_at(points: &[CurvePoint], percent: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if percent == a.percent {
            return Some(a.metric);
        }
        if percent > a.percent && percent < b.percent {
            return Some(a.metric + (b.metric - a.metric) * (percent - a.percent) / (b.percent - a.percent));
        }
    }
    points.last().filter(|p| p.percent == percent).map(|p| p.metric)
}

/// Increasing drop counts, starting at 0, for a fixed feature count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropSchedule {
    feature_count: usize,
    counts: Vec<usize>,
}

impl DropSchedule {
    pub fn from_counts(feature_count: usize, counts: Vec<usize>) -> Result<Self> {
        if feature_count == 0 {
            return Err(FadError::Config("schedule needs at least one feature".into()));
        }
        if counts.first() != Some(&0) {
            return Err(FadError::Config("schedule must start at 0 dropped features".into()));
        }
        if counts.windows(2).any(|w| w[1] <= w[0]) || counts.last().is_some_and(|&c| c > feature_count) {
            return Err(FadError::Config("schedule counts must increase strictly within the feature count".into()));
        }
        Ok(Self { feature_count, counts })
    }

    /// Every drop count from 0 to `ceil(beta * d / 100)`.
    pub fn bounded(feature_count: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let top = bounded_top(feature_count, beta);
        Self::from_counts(feature_count, (0..=top).collect())
    }

    /// [`DropSchedule::bounded`] followed by a coarse tail every
    /// [`TAIL_STEP_PERCENT`] up to all features dropped.
    pub fn with_tail(feature_count: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let mut counts: Vec<usize> = (0..=bounded_top(feature_count, beta)).collect();
        let steps = (100.0 / TAIL_STEP_PERCENT).round() as usize;
        for s in 1..=steps {
            let pct = TAIL_STEP_PERCENT * s as f64;
            let c = ceil_tolerant(pct * feature_count as f64 / 100.0).min(feature_count);
            if c > *counts.last().unwrap() {
                counts.push(c);
            }
        }
        Self::from_counts(feature_count, counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn percents(&self) -> Vec<f64> {
        self.counts.iter().map(|&k| 100.0 * k as f64 / self.feature_count as f64).collect()
    }
}

fn ceil_tolerant(v: f64) -> usize {
    (v - 1e-9).ceil().max(0.0) as usize
}

fn bounded_top(feature_count: usize, beta: f64) -> usize {
    ceil_tolerant(beta * feature_count as f64 / 100.0).min(feature_count)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 100.0) {
        return Err(FadError::Config(format!("beta {beta} must lie in (0, 100]")));
    }
    Ok(())
}

/// Copy of `x` whose `dropped` features take baseline values.
pub fn drop_features(x: &[f64], dropped: &[usize], baseline: &BaselineVector) -> Result<Vec<f64>> {
    baseline.check_dim(x.len())?;
    let mut out = x.to_vec();
    for &i in dropped {
        if i >= x.len() {
            return Err(FadError::Index(format!("feature {i} out of range for {} features", x.len())));
        }
        out[i] = baseline.values()[i];
    }
    Ok(out)
}

/// For each scheduled drop count, how many instances are still classified
/// as `class` after their own top-k features are replaced by the baseline.
pub fn correct_counts(
    net: &DenseNetwork,
    instances: &[Vec<f64>],
    rankings: &[ImportanceRanking],
    baseline: &BaselineVector,
    class: usize,
    schedule: &DropSchedule,
) -> Result<Vec<usize>> {
    let d = net.input_dim();
    if schedule.feature_count() != d {
        return Err(FadError::Shape(format!("schedule covers {} features, model has {d}", schedule.feature_count())));
    }
    if class >= net.class_count() {
        return Err(FadError::Index(format!("class {class} out of range")));
    }
    if instances.len() != rankings.len() {
        return Err(FadError::Shape(format!("{} instances but {} rankings", instances.len(), rankings.len())));
    }
    baseline.check_dim(d)?;
    let mut counts = vec![0usize; schedule.counts().len()];
    for (x, ranking) in instances.iter().zip(rankings) {
        if x.len() != d {
            return Err(FadError::Shape(format!("instance has {} features, expected {d}", x.len())));
        }
        if ranking.len() != d {
            return Err(FadError::Shape("ranking does not cover every feature".into()));
        }
        let mut current = x.clone();
        let mut applied = 0;
        for (slot, &k) in schedule.counts().iter().enumerate() {
            for &f in &ranking.order[applied..k] {
                current[f] = baseline.values()[f];
            }
            applied = k;
            if net.predict_unchecked(&current) == class {
                counts[slot] += 1;
            }
        }
    }
    Ok(counts)
}

/// Fraction of `instances` (all of true class `class`) still predicted as
/// `class` at each scheduled drop count.
#[allow(clippy::too_many_arguments)]
pub fn fad_curve(
    net: &DenseNetwork,
    instances: &[Vec<f64>],
    rankings: &[ImportanceRanking],
    baseline: &BaselineVector,
    class: usize,
    schedule: &DropSchedule,
    class_name: &str,
    method: &str,
) -> Result<FadCurve> {
    if instances.is_empty() {
        return Err(FadError::Degenerate(format!("class {class_name} has no evaluation instances")));
    }
    let counts = correct_counts(net, instances, rankings, baseline, class, schedule)?;
    curve_from_counts(&counts, instances.len(), schedule, class, class_name, method, None)
}

pub(crate) fn curve_from_counts(
    counts: &[usize],
    total: usize,
    schedule: &DropSchedule,
    class: usize,
    class_name: &str,
    method: &str,
    fold: Option<usize>,
) -> Result<FadCurve> {
    if total == 0 {
        return Err(FadError::Degenerate(format!("class {class_name} has no evaluation instances")));
    }
    let points = schedule
        .percents()
        .into_iter()
        .zip(counts)
        .map(|(percent, &c)| CurvePoint { percent, metric: c as f64 / total as f64 })
        .collect();
    FadCurve::new(points, class, class_name, method, fold, total)
}

/// Trapezoidal area under the curve on `[0, beta]`; the curve is linearly
/// interpolated at beta when beta falls between grid points.
pub fn trapezoid_auc(curve: &FadCurve, beta: f64) -> Result<f64> {
    trapezoid_auc_points(&curve.points, beta)
}

pub fn trapezoid_auc_points(points: &[CurvePoint], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    validate_points(points)?;
    let mut area = ExactSum::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.percent >= beta {
            break;
        }
        let (right, right_metric) = if b.percent <= beta {
            (b.percent, b.metric)
        } else {
            (beta, a.metric + (b.metric - a.metric) * (beta - a.percent) / (b.percent - a.percent))
        };
        area.add((a.metric + right_metric) / 2.0 * (right - a.percent));
    }
    let reach = points.last().map(|p| p.percent).unwrap_or(0.0);
    if reach < beta {
        return Err(FadError::Config(format!("curve stops at {reach}% before beta = {beta}%")));
    }
    Ok(area.value())
}

/// `auc / (beta * max_metric)`.
pub fn n_auc(auc: f64, beta: f64, max_metric: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(max_metric > 0.0) {
        return Err(FadError::Excluded(format!(
            "maximum metric {max_metric} is not positive; the curve carries no signal on [0, {beta}]"
        )));
    }
    if !(auc > 0.0) {
        return Err(FadError::Excluded(format!("AUC {auc} is not positive on [0, {beta}]")));
    }
    let value = auc / (beta * max_metric);
    // Flat curves at max_metric can land one ulp above 1 after interpolation.
    if value > 1.0 + 1e-12 {
        return Err(FadError::Domain(format!(
            "AUC {auc} exceeds beta * max_metric = {}; max_metric must be the cross-method maximum",
            beta * max_metric
        )));
    }
    Ok(value.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaucEntry {
    pub class: usize,
    pub method: String,
    pub auc: f64,
    pub n_auc: f64,
    pub beta: f64,
    pub max_metric: f64,
}

/// N-AUC of every curve, normalised by the largest metric any of them
/// reaches on `[0, beta]`. All curves should describe the same class.
pub fn compare_curves(curves: &[&FadCurve], beta: f64) -> Result<Vec<NaucEntry>> {
    if curves.is_empty() {
        return Err(FadError::Degenerate("no curves to compare".into()));
    }
    let max_metric = curves.iter().map(|c| c.max_within(beta)).fold(f64::NEG_INFINITY, f64::max);
    curves
        .iter()
        .map(|c| {
            let auc = trapezoid_auc(c, beta)?;
            Ok(NaucEntry {
                class: c.class,
                method: c.method.clone(),
                auc,
                n_auc: n_auc(auc, beta, max_metric)?,
                beta,
                max_metric,
            })
        })
        .collect()
}
