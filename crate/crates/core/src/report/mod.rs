//! Tabular and graphical output for FAD analyses.

mod svg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};
use crate::fadcurve::{n_auc, trapezoid_auc, FadCurve};

pub use svg::curves_svg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub auc: f64,
    /// `None` when the method's curve has no area on `[0, beta]`.
    pub n_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaucRow {
    pub class: usize,
    pub class_name: String,
    pub instances: usize,
    pub max_metric: f64,
    pub scores: Vec<MethodScore>,
}

impl NaucRow {
    /// Method with the lowest N-AUC; ties go to the earlier method.
    pub fn best(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for s in &self.scores {
            if let Some(v) = s.n_auc {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((&s.method, v));
                }
            }
        }
        best.map(|(m, _)| m)
    }

    pub fn score(&self, method: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.method == method).and_then(|s| s.n_auc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedClass {
    pub class: usize,
    pub class_name: String,
    pub instances: usize,
    pub reason: String,
}

/// Curves that go up while features are removed. Expected occasionally
/// (a dropped feature can push an instance back over the boundary) but
/// worth surfacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDiagnostic {
    pub class_name: String,
    pub method: String,
    pub rises_within_beta: usize,
    pub start_metric: f64,
    pub metric_at_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaucReport {
    pub beta: f64,
    pub metric: String,
    pub aggregation: String,
    pub methods: Vec<String>,
    pub rows: Vec<NaucRow>,
    pub excluded: Vec<ExcludedClass>,
    pub diagnostics: Vec<CurveDiagnostic>,
}

impl NaucReport {
    /// Scores each class's curves against the largest value any method
    /// reaches on `[0, beta]`. Classes without test instances or with an
    /// all-zero curve set are listed in `excluded`.
    pub fn from_class_curves(
        beta: f64,
        methods: &[&str],
        aggregation: &str,
        per_class: &[(usize, String, usize, Vec<FadCurve>)],
    ) -> Self {
        let mut rows = Vec::new();
        let mut excluded = Vec::new();
        let mut diagnostics = Vec::new();
        let mut metric = crate::fadcurve::ACCURACY.to_string();
        for (class, name, instances, curves) in per_class {
            if curves.is_empty() || *instances == 0 {
                excluded.push(ExcludedClass {
                    class: *class,
                    class_name: name.clone(),
                    instances: *instances,
                    reason: "no test instances".into(),
                });
                continue;
            }
            metric = curves[0].metric_name.clone();
            let max_metric = curves.iter().map(|c| c.max_within(beta)).fold(f64::NEG_INFINITY, f64::max);
            if !(max_metric > 0.0) {
                excluded.push(ExcludedClass {
                    class: *class,
                    class_name: name.clone(),
                    instances: *instances,
                    reason: format!("{metric} is 0 for every method on [0, {beta}]"),
                });
                continue;
            }
            let mut scores = Vec::with_capacity(curves.len());
            for c in curves {
                let auc = trapezoid_auc(c, beta).unwrap_or(f64::NAN);
                let value = match n_auc(auc, beta, max_metric) {
                    Ok(v) => Some(v),
                    Err(FadError::Excluded(msg)) => {
                        log::warn!("class {name}, method {}: {msg}", c.method);
                        None
                    }
                    Err(e) => {
                        log::error!("class {name}, method {}: {e}", c.method);
                        None
                    }
                };
                scores.push(MethodScore { method: c.method.clone(), auc, n_auc: value });
                let rises = c.rises_within(beta);
                if rises > 0 {
                    diagnostics.push(CurveDiagnostic {
                        class_name: name.clone(),
                        method: c.method.clone(),
                        rises_within_beta: rises,
                        start_metric: c.points[0].metric,
                        metric_at_beta: c.value_at(beta).unwrap_or(f64::NAN),
                    });
                }
            }
            rows.push(NaucRow { class: *class, class_name: name.clone(), instances: *instances, max_metric, scores });
        }
        Self {
            beta,
            metric,
            aggregation: aggregation.to_string(),
            methods: methods.iter().map(|m| m.to_string()).collect(),
            rows,
            excluded,
            diagnostics,
        }
    }

    /// Classes where `a` scores strictly lower than `b`, out of the classes
    /// where both are defined.
    pub fn wins(&self, a: &str, b: &str) -> (usize, usize) {
        let mut wins = 0;
        let mut total = 0;
        for row in &self.rows {
            if let (Some(x), Some(y)) = (row.score(a), row.score(b)) {
                total += 1;
                if x < y {
                    wins += 1;
                }
            }
        }
        (wins, total)
    }

    /// `class,instances,<method>...`, one row per scored class. Floats use
    /// the shortest round-trip representation; missing values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,instances");
        for m in &self.methods {
            out.push(',');
            out.push_str(&csv_field(m));
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", csv_field(&row.class_name), row.instances);
            for m in &self.methods {
                out.push(',');
                if let Some(v) = row.score(m) {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Markdown table with the lowest N-AUC per class in bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "N-AUC at beta = {}% ({}, {})\n", self.beta, self.metric, self.aggregation);
        let _ = write!(out, "| class | instances |");
        for m in &self.methods {
            let _ = write!(out, " {m} |");
        }
        out.push_str("\n|---|---:|");
        out.push_str(&"---:|".repeat(self.methods.len()));
        out.push('\n');
        for row in &self.rows {
            let best = row.best();
            let _ = write!(out, "| {} | {} |", row.class_name, row.instances);
            for m in &self.methods {
                match row.score(m) {
                    Some(v) if best == Some(m.as_str()) => {
                        let _ = write!(out, " **{v:.4}** |");
                    }
                    Some(v) => {
                        let _ = write!(out, " {v:.4} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        for e in &self.excluded {
            let _ = writeln!(out, "\nExcluded {} (n = {}): {}", e.class_name, e.instances, e.reason);
        }
        out
    }
}

/// Head-to-head record of one method against a reference method over many
/// reports (typically one per seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub method: String,
    pub against: String,
    /// Rows where `method` has a strictly lower N-AUC.
    pub wins: usize,
    /// Rows where `against` is defined. A missing `method` value counts as a loss.
    pub pairs: usize,
    pub rate: f64,
}

pub fn win_rates(reports: &[NaucReport], against: &str) -> Vec<WinRate> {
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        for m in &r.methods {
            if m != against && !methods.contains(&m.as_str()) {
                methods.push(m);
            }
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let mut wins = 0;
            let mut pairs = 0;
            for row in reports.iter().flat_map(|r| &r.rows) {
                if let Some(reference) = row.score(against) {
                    pairs += 1;
                    if row.score(m).is_some_and(|v| v < reference) {
                        wins += 1;
                    }
                }
            }
            let rate = if pairs == 0 { 0.0 } else { wins as f64 / pairs as f64 };
            WinRate { method: m.to_string(), against: against.to_string(), wins, pairs, rate }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long-format curve table: `class,method,fold,percent,metric,instances`.
/// Pooled curves leave `fold` empty.
pub fn curves_to_csv(curves: &[FadCurve]) -> String {
    let mut out = String::from("class,method,fold,percent,metric,instances\n");
    for c in curves {
        let fold = c.fold.map(|f| f.to_string()).unwrap_or_default();
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&c.class_name),
                csv_field(&c.method),
                fold,
                p.percent,
                p.metric,
                c.instances
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fadcurve::CurvePoint;

    fn curve(method: &str, metrics: &[f64]) -> FadCurve {
        let points = metrics
            .iter()
            .enumerate()
            .map(|(k, &m)| CurvePoint { percent: 10.0 * k as f64, metric: m })
            .collect();
        FadCurve::new(points, 0, "a,b", method, None, 4).unwrap()
    }

    fn sample() -> NaucReport {
        let curves = vec![curve("IG", &[1.0, 0.5, 0.0]), curve("Random", &[1.0, 1.0, 0.75])];
        let zero = vec![curve("IG", &[0.0, 0.0, 0.0]), curve("Random", &[0.0, 0.0, 0.0])];
        NaucReport::from_class_curves(
            20.0,
            &["IG", "Random"],
            "pooled",
            &[(0, "a,b".into(), 4, curves), (1, "z".into(), 3, zero), (2, "e".into(), 0, vec![])],
        )
    }

    #[test]
    fn scores_and_exclusions() {
        let r = sample();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.excluded.len(), 2);
        // IG: (0.75*10 + 0.25*10) / 20 = 0.5; Random: (10 + 8.75) / 20
        assert_eq!(r.rows[0].score("IG"), Some(0.5));
        assert_eq!(r.rows[0].score("Random"), Some(0.9375));
        assert_eq!(r.rows[0].best(), Some("IG"));
        assert_eq!(r.wins("IG", "Random"), (1, 1));
    }

    #[test]
    fn csv_quotes_and_layout() {
        let csv = sample().to_csv();
        assert_eq!(csv, "class,instances,IG,Random\n\"a,b\",4,0.5,0.9375\n");
    }

    #[test]
    fn markdown_bolds_lowest() {
        let md = sample().to_markdown();
        assert!(md.contains("**0.5000**"));
        assert!(md.contains("Excluded z"));
    }

    #[test]
    fn rising_curve_is_diagnosed() {
        let r = NaucReport::from_class_curves(20.0, &["m"], "pooled", &[(0, "c".into(), 4, vec![curve("m", &[0.5, 0.75, 0.25])])]);
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.rows[0].score("m"), Some((0.625 * 10.0 + 0.5 * 10.0) / (20.0 * 0.75)));
    }

    #[test]
    fn win_rate_counts_missing_as_loss() {
        let mut a = sample();
        let mut b = sample();
        b.rows[0].scores[0].n_auc = None;
        a.methods.push("Extra".into());
        let rates = win_rates(&[a, b], "Random");
        let ig = rates.iter().find(|w| w.method == "IG").unwrap();
        assert_eq!((ig.wins, ig.pairs), (1, 2));
        assert_eq!(rates.iter().find(|w| w.method == "Extra").unwrap().wins, 0);
    }

    #[test]
    fn curve_csv_rows() {
        let csv = curves_to_csv(&[curve("IG", &[1.0, 0.5])]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("\"a,b\",IG,,10,0.5,4"));
    }
}
