use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use fad_core::attribution::{
    integrated_gradients, shapley_auto, shapley_exact_limited, shapley_sampled, AttributionMeta, BaselineVector,
    ImportanceRanking, DEFAULT_EXACT_LIMIT, DEFAULT_IG_STEPS, DEFAULT_PERMUTATIONS,
};
use fad_core::nncore::GradientTarget;
use fad_core::numeric::derive_seed;
use fad_core::pipeline::{AttributionTarget, BaselineChoice, Method};
use fad_core::FadError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::model::{load_dataset, ModelFile};
use crate::run::Run;

pub const ATTRIBUTION_FORMAT: &str = "fadx-attributions";
const TAG_SHAPLEY: u64 = 4;

#[derive(Args, Debug, Clone)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub kinds: Option<PathBuf>,
    /// Comma-separated: ig, shapley, shapley-exact, shapley-sampled.
    #[arg(long, value_delimiter = ',', default_value = "ig")]
    pub method: Vec<String>,
    /// Integration steps for integrated gradients.
    #[arg(long, default_value_t = DEFAULT_IG_STEPS)]
    pub steps: usize,
    /// Permutations for sampled Shapley values.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub permutations: u64,
    /// Largest input width explained with exact Shapley values.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    /// mean (training means, 0 for binary features) or zero.
    #[arg(long, default_value = "mean")]
    pub baseline: String,
    /// Class to explain: true or predicted.
    #[arg(long, default_value = "true")]
    pub target: String,
    /// Explained scalar: probability or logit.
    #[arg(long, default_value = "probability")]
    pub score: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub score: f64,
    /// 1 is the most important.
    pub rank: usize,
    /// `|score| / sum |score|`.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub instance: usize,
    /// Method as requested (`IG`, `Shapley`, ...).
    pub method: String,
    /// Estimator actually used.
    pub estimator: String,
    pub label: usize,
    pub predicted: usize,
    pub target_class: usize,
    pub meta: AttributionMeta,
    pub features: Vec<FeatureScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionFile {
    pub format: String,
    pub version: u32,
    pub model_sha256: String,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub tie_break: String,
    pub rows: Vec<AttributionRow>,
}

impl AttributionFile {
    pub fn scores(row: &AttributionRow) -> Vec<f64> {
        row.features.iter().map(|f| f.score).collect()
    }
}

pub fn parse_baseline(s: &str) -> Result<BaselineChoice> {
    match s {
        "mean" => Ok(BaselineChoice::Mean),
        "zero" => Ok(BaselineChoice::Zero),
        _ => Err(FadError::Config(format!("baseline must be mean or zero, got '{s}'")).into()),
    }
}

pub fn parse_target(s: &str) -> Result<AttributionTarget> {
    match s {
        "true" => Ok(AttributionTarget::TrueClass),
        "predicted" => Ok(AttributionTarget::Predicted),
        _ => Err(FadError::Config(format!("target must be true or predicted, got '{s}'")).into()),
    }
}

pub fn parse_score(s: &str) -> Result<GradientTarget> {
    match s {
        "probability" => Ok(GradientTarget::Probability),
        "logit" => Ok(GradientTarget::Logit),
        _ => Err(FadError::Config(format!("score must be probability or logit, got '{s}'")).into()),
    }
}

pub fn run(ctx: &crate::run::Context, args: AttributeArgs) -> Result<()> {
    let mut run = Run::start(ctx, "attribute")?;
    let methods: Vec<Method> = args.method.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(FadError::Config("no attribution method given".into()).into());
    }
    if let Some(m) = methods.iter().find(|m| matches!(m, Method::Oracle | Method::Random)) {
        return Err(FadError::Config(format!("{} is a FAD reference ranking, not an attribution method", m.label())).into());
    }
    if args.steps == 0 || args.permutations == 0 {
        return Err(FadError::Config("steps and permutations must be positive".into()).into());
    }
    let baseline_choice = parse_baseline(&args.baseline)?;
    let target = parse_target(&args.target)?;
    let score = parse_score(&args.score)?;

    let (model, net, model_sha256) = ModelFile::load(&mut run, &args.model)?;
    let net = net.with_gradient_target(score);
    let data = load_dataset(&mut run, &args.data, args.kinds.as_deref(), Some(&model.class_names))?;
    let xs = model.prepare(&data)?;
    let baseline = match baseline_choice {
        BaselineChoice::Mean => model.baseline()?,
        BaselineChoice::Zero => BaselineVector::zeros(xs.first().map_or(0, Vec::len)),
    };
    let predictions: Vec<usize> = xs.iter().map(|x| net.predict(x)).collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for method in &methods {
        let block: Vec<AttributionRow> = (0..xs.len())
            .into_par_iter()
            .map(|i| -> Result<AttributionRow> {
                let class = match target {
                    AttributionTarget::TrueClass => data.labels()[i],
                    AttributionTarget::Predicted => predictions[i],
                };
                let seed = derive_seed(ctx.seed, &[TAG_SHAPLEY, i as u64]);
                let attr = match method {
                    Method::Ig => integrated_gradients(&net, &xs[i], &baseline, class, args.steps)?,
                    Method::Shapley => {
                        shapley_auto(&net, &xs[i], &baseline, class, args.exact_limit, args.permutations, seed)?
                    }
                    Method::ShapleyExact => shapley_exact_limited(&net, &xs[i], &baseline, class, args.exact_limit)?,
                    Method::ShapleySampled => shapley_sampled(&net, &xs[i], &baseline, class, args.permutations, seed)?,
                    Method::Oracle | Method::Random => unreachable!("rejected above"),
                };
                let ranks = ImportanceRanking::from_scores(&attr.scores).ranks();
                let shares = attr.shares();
                let features = attr
                    .scores
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| FeatureScore {
                        name: model.feature_names[j].clone(),
                        score: s,
                        rank: ranks[j] + 1,
                        share: shares[j],
                    })
                    .collect();
                Ok(AttributionRow {
                    instance: i,
                    method: method.label().to_string(),
                    estimator: attr.method.as_str().to_string(),
                    label: data.labels()[i],
                    predicted: predictions[i],
                    target_class: class,
                    meta: attr.meta,
                    features,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(block);
    }

    let file = AttributionFile {
        format: ATTRIBUTION_FORMAT.to_string(),
        version: 1,
        model_sha256,
        feature_names: model.feature_names.clone(),
        class_names: model.class_names.clone(),
        tie_break: fad_core::attribution::TIE_BREAK_RULE.to_string(),
        rows,
    };
    run.write_json("attributions.json", &file)?;
    let max_gap = file.rows.iter().map(|r| r.meta.completeness_gap).fold(0.0, f64::max);
    println!("wrote {} attribution rows; max completeness gap {max_gap:.3e}", file.rows.len());
    run.finish(
        json!({
            "methods": methods.iter().map(Method::label).collect::<Vec<_>>(),
            "steps": args.steps,
            "permutations": args.permutations,
            "exact_limit": args.exact_limit,
            "baseline": args.baseline,
            "target": args.target,
            "score": args.score,
        }),
        json!({ "rows": file.rows.len(), "max_completeness_gap": max_gap }),
    )?;
    Ok(())
}
