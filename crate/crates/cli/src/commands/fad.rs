use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::Args;
use fad_core::attribution::ImportanceRanking;
use fad_core::fadcurve::{fad_curve, DropSchedule, FadCurve};
use fad_core::pipeline::{
    generate_vital_few, informative_separation, run_fad_analysis, Aggregation, FadAnalysis, Method, RankingMode,
    TabularDataset,
};
use fad_core::report::{curves_svg, curves_to_csv, win_rates, NaucReport, WinRate};
use fad_core::FadError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::attribute::{AttributionFile, AttributionRow, ATTRIBUTION_FORMAT};
use super::gen::GroundTruth;
use crate::config::RunConfig;
use crate::model::{load_dataset, ModelFile};
use crate::run::Run;

/// Share of correctly classified instances an attribution must rank
/// informative-over-noise for a seed to count as separated.
const SEPARATION_MAJORITY: f64 = 0.5;

#[derive(Args, Debug, Clone)]
pub struct FadArgs {
    /// Cross-validate: train per fold, attribute test instances, pool curves.
    #[arg(long)]
    pub end_to_end: bool,
    /// Dataset CSV (end-to-end, or evaluation data with --model).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub kinds: Option<PathBuf>,
    /// Generate a vital-few dataset per repeat instead of reading --data.
    #[arg(long, conflicts_with = "data")]
    pub synthetic: bool,
    /// Trained model (non end-to-end mode).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Attribution JSON written by `attribute` (non end-to-end mode).
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground-truth JSON written by `gen`; enables the oracle method.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Comma-separated methods: ig, shapley, shapley-exact, shapley-sampled,
    /// oracle, random.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Upper end of the N-AUC range, in percent of features dropped [default: 20].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// pooled or fold-average.
    #[arg(long)]
    pub aggregation: Option<String>,
    /// per-instance or class-global.
    #[arg(long)]
    pub ranking: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub permutations: Option<u64>,
    #[arg(long)]
    pub ig_steps: Option<usize>,
    /// Independent runs with seeds seed, seed+1, ... (end-to-end only).
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub informative_fraction: Option<f64>,
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Separation {
    pub method: String,
    pub seeds_passed: usize,
    pub seeds: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FadSummary {
    pub beta: f64,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub accuracy: Vec<f64>,
    /// Each method against the random ranking, over (seed, class) pairs.
    pub win_rates: Vec<WinRate>,
    /// Informative features out-rank noise features, per seed.
    pub separation: Vec<Separation>,
    pub excluded: Vec<String>,
}

fn parse_methods(raw: &[String]) -> Result<Vec<Method>> {
    Ok(raw.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_, _>>()?)
}

pub fn run(ctx: &crate::run::Context, args: FadArgs) -> Result<()> {
    if args.end_to_end {
        end_to_end(ctx, args)
    } else {
        from_attributions(ctx, args)
    }
}

fn write_report(run: &mut Run, prefix: &str, report: &NaucReport, curves: &[FadCurve]) -> Result<()> {
    run.write(&format!("{prefix}nauc.csv"), report.to_csv())?;
    run.write(&format!("{prefix}nauc.json"), report.to_json()? + "\n")?;
    run.write(&format!("{prefix}nauc.md"), report.to_markdown())?;
    run.write(&format!("{prefix}curves.csv"), curves_to_csv(curves))?;
    run.write(&format!("{prefix}curves.svg"), curves_svg(curves, report.beta))?;
    Ok(())
}

fn end_to_end(ctx: &crate::run::Context, args: FadArgs) -> Result<()> {
    let mut run = Run::start(ctx, "fad")?;
    let mut config = RunConfig::load(&mut run, args.config.as_deref())?;
    if let Some(m) = &args.methods {
        config.fad.methods = parse_methods(m)?;
    }
    config.fad.beta = args.beta.unwrap_or(config.fad.beta);
    config.fad.folds = args.folds.unwrap_or(config.fad.folds);
    config.fad.permutations = args.permutations.unwrap_or(config.fad.permutations);
    config.fad.ig_steps = args.ig_steps.unwrap_or(config.fad.ig_steps);
    config.train.epochs = args.epochs.unwrap_or(config.train.epochs);
    if let Some(a) = &args.aggregation {
        config.fad.aggregation = match a.as_str() {
            "pooled" => Aggregation::Pooled,
            "fold-average" => Aggregation::FoldAverage,
            _ => return Err(FadError::Config(format!("aggregation must be pooled or fold-average, got '{a}'")).into()),
        };
    }
    if let Some(r) = &args.ranking {
        config.fad.ranking = match r.as_str() {
            "per-instance" => RankingMode::PerInstance,
            "class-global" => RankingMode::ClassGlobal,
            _ => return Err(FadError::Config(format!("ranking must be per-instance or class-global, got '{r}'")).into()),
        };
    }
    let syn = &mut config.synthetic;
    syn.instances = args.instances.unwrap_or(syn.instances);
    syn.features = args.features.unwrap_or(syn.features);
    syn.informative_fraction = args.informative_fraction.unwrap_or(syn.informative_fraction);
    syn.classes = args.classes.unwrap_or(syn.classes);
    if args.repeats == 0 {
        return Err(FadError::Config("repeats must be at least 1".into()).into());
    }
    if config.fad.methods.is_empty() {
        return Err(FadError::Config("method list is empty".into()).into());
    }

    let file_data = match (&args.data, args.synthetic) {
        (Some(path), false) => Some(load_dataset(&mut run, path, args.kinds.as_deref(), None)?),
        (None, true) => None,
        _ => return Err(FadError::Config("end-to-end mode needs --data or --synthetic".into()).into()),
    };
    if let Some(path) = &args.truth {
        let truth: GroundTruth = serde_json::from_str(&run.input_text(path)?)
            .map_err(FadError::from)
            .with_context(|| format!("invalid ground truth {}", path.display()))?;
        config.fad.ground_truth = Some(truth.informative);
    }

    let base_seed = config.fad.seed;
    let mut reports = Vec::new();
    let mut seeds = Vec::new();
    let mut accuracy = Vec::new();
    let mut separation: Vec<Separation> = Vec::new();
    for r in 0..args.repeats {
        let seed = base_seed.wrapping_add(r as u64);
        let mut fad = config.fad.clone();
        let mut train = config.train.clone();
        fad.seed = seed;
        train.seed = seed;
        let generated;
        let data: &TabularDataset = match &file_data {
            Some(d) => d,
            None => {
                let mut syn = config.synthetic.clone();
                syn.seed = seed;
                generated = generate_vital_few(&syn)?;
                fad.ground_truth = Some(generated.informative.clone());
                &generated.dataset
            }
        };
        let analysis = run_fad_analysis(data, &train, &fad)?;
        let prefix = if args.repeats == 1 { String::new() } else { format!("seed-{seed}/") };
        write_analysis(&mut run, &prefix, &analysis)?;
        if let Some(truth) = &fad.ground_truth {
            for (method, share, _) in informative_separation(&analysis, truth) {
                if method == Method::Oracle.label() || method == Method::Random.label() {
                    continue;
                }
                let entry = match separation.iter_mut().find(|s| s.method == method) {
                    Some(e) => e,
                    None => {
                        separation.push(Separation { method: method.clone(), seeds_passed: 0, seeds: 0, rate: 0.0 });
                        separation.last_mut().expect("just pushed")
                    }
                };
                entry.seeds += 1;
                entry.seeds_passed += usize::from(share > SEPARATION_MAJORITY);
            }
        }
        if args.repeats == 1 {
            print!("{}", analysis.report.to_markdown());
        } else {
            log::info!("seed {seed}: accuracy {:.4}", analysis.metrics.accuracy);
        }
        seeds.push(seed);
        accuracy.push(analysis.metrics.accuracy);
        reports.push(analysis.report);
    }
    for s in &mut separation {
        s.rate = s.seeds_passed as f64 / s.seeds as f64;
    }

    let summary = FadSummary {
        beta: config.fad.beta,
        methods: config.fad.methods.iter().map(|m| m.label().to_string()).collect(),
        seeds,
        accuracy,
        win_rates: if config.fad.methods.contains(&Method::Random) {
            win_rates(&reports, Method::Random.label())
        } else {
            Vec::new()
        },
        separation,
        excluded: reports
            .iter()
            .flat_map(|r| r.excluded.iter().map(|e| format!("{}: {}", e.class_name, e.reason)))
            .collect(),
    };
    run.write_json("summary.json", &summary)?;
    let text = summary_text(&summary);
    run.write("summary.md", &text)?;
    print!("{text}");
    let summary_value = serde_json::to_value(&summary)?;
    run.finish(json!({ "train": config.train, "fad": config.fad, "synthetic": config.synthetic, "repeats": args.repeats }), summary_value)?;
    Ok(())
}

fn write_analysis(run: &mut Run, prefix: &str, analysis: &FadAnalysis) -> Result<()> {
    write_report(run, prefix, &analysis.report, &analysis.curves)?;
    run.write(&format!("{prefix}fold_curves.csv"), curves_to_csv(&analysis.fold_curves))?;
    run.write_json(
        &format!("{prefix}metrics.json"),
        &json!({ "pooled": analysis.metrics, "folds": analysis.folds, "fold_metrics": analysis.fold_metrics }),
    )?;
    Ok(())
}

fn summary_text(summary: &FadSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seeds: {}", summary.seeds.len());
    for w in &summary.win_rates {
        let _ = writeln!(out, "{} beats {}: {}/{} = {:.3}", w.method, w.against, w.wins, w.pairs, w.rate);
    }
    for s in &summary.separation {
        let _ = writeln!(out, "{} informative > noise: {}/{} seeds", s.method, s.seeds_passed, s.seeds);
    }
    for e in &summary.excluded {
        let _ = writeln!(out, "excluded {e}");
    }
    out
}

fn from_attributions(ctx: &crate::run::Context, args: FadArgs) -> Result<()> {
    let (Some(model_path), Some(data_path), Some(attr_path)) = (&args.model, &args.data, &args.attributions) else {
        return Err(FadError::Config("without --end-to-end, --model, --data and --attributions are required".into()).into());
    };
    if args.repeats != 1 {
        return Err(FadError::Config("--repeats needs --end-to-end".into()).into());
    }
    let mut run = Run::start(ctx, "fad")?;
    let config = RunConfig::load(&mut run, args.config.as_deref())?;
    let beta = args.beta.unwrap_or(config.fad.beta);
    let (model, net, model_sha256) = ModelFile::load(&mut run, model_path)?;
    let data = load_dataset(&mut run, data_path, args.kinds.as_deref(), Some(&model.class_names))?;
    let xs = model.prepare(&data)?;
    let attrs: AttributionFile = serde_json::from_str(&run.input_text(attr_path)?)
        .map_err(FadError::from)
        .with_context(|| format!("invalid attributions {}", attr_path.display()))?;
    if attrs.format != ATTRIBUTION_FORMAT {
        return Err(FadError::Config(format!("{} is not an attribution file", attr_path.display())).into());
    }
    if attrs.model_sha256 != model_sha256 {
        return Err(FadError::Config("attributions were computed with a different model".into()).into());
    }

    let mut methods: Vec<String> = Vec::new();
    for r in &attrs.rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    if let Some(filter) = &args.methods {
        let wanted: Vec<String> = parse_methods(filter)?.iter().map(|m| m.label().to_string()).collect();
        methods.retain(|m| wanted.contains(m));
    }
    if methods.is_empty() {
        return Err(FadError::Config("method list is empty".into()).into());
    }

    let index: HashMap<(&str, usize), &AttributionRow> =
        attrs.rows.iter().map(|r| ((r.method.as_str(), r.instance), r)).collect();
    let baseline = model.baseline()?;
    let schedule = DropSchedule::with_tail(data.feature_count(), beta)?;
    let mut per_class = Vec::new();
    let mut all_curves = Vec::new();
    for class in 0..data.class_count() {
        let name = data.class_names()[class].clone();
        let members: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == class).collect();
        if members.is_empty() {
            per_class.push((class, name, 0, Vec::new()));
            continue;
        }
        let instances: Vec<Vec<f64>> = members.iter().map(|&i| xs[i].clone()).collect();
        let mut curves = Vec::new();
        for method in &methods {
            let mut rankings = Vec::with_capacity(members.len());
            for &i in &members {
                let row = index
                    .get(&(method.as_str(), i))
                    .ok_or_else(|| FadError::Config(format!("no {method} attribution for instance {i}")))?;
                if row.features.len() != data.feature_count() {
                    return Err(FadError::Shape(format!("attribution row {i} has {} features", row.features.len())).into());
                }
                rankings.push(ImportanceRanking::from_scores(&AttributionFile::scores(row)));
            }
            curves.push(fad_curve(&net, &instances, &rankings, &baseline, class, &schedule, &name, method)?);
        }
        all_curves.extend(curves.iter().cloned());
        per_class.push((class, name, members.len(), curves));
    }
    let labels: Vec<&str> = methods.iter().map(String::as_str).collect();
    let report = NaucReport::from_class_curves(beta, &labels, "single-model", &per_class);
    write_report(&mut run, "", &report, &all_curves)?;
    print!("{}", report.to_markdown());
    run.finish(json!({ "beta": beta, "methods": methods }), serde_json::to_value(&report)?)?;
    Ok(())
}
