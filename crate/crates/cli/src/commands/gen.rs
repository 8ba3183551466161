use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use fad_core::pipeline::generate_vital_few;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::run::Run;

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// JSON config; its `synthetic` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub informative_fraction: Option<f64>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Standard deviation of the class centres on informative features.
    #[arg(long)]
    pub separation: Option<f64>,
}

/// `ground_truth.json` written next to a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub informative: Vec<usize>,
    pub informative_names: Vec<String>,
}

pub fn run(ctx: &crate::run::Context, args: GenArgs) -> Result<()> {
    let mut run = Run::start(ctx, "gen")?;
    let mut cfg = RunConfig::load(&mut run, args.config.as_deref())?.synthetic;
    cfg.instances = args.instances.unwrap_or(cfg.instances);
    cfg.features = args.features.unwrap_or(cfg.features);
    cfg.informative_fraction = args.informative_fraction.unwrap_or(cfg.informative_fraction);
    cfg.classes = args.classes.unwrap_or(cfg.classes);
    cfg.separation = args.separation.unwrap_or(cfg.separation);

    let syn = generate_vital_few(&cfg)?;
    let mut csv = Vec::new();
    syn.dataset.to_csv(&mut csv)?;
    run.write("dataset.csv", csv)?;
    run.write_json("dataset.kinds.json", &syn.dataset.sidecar())?;
    let truth = GroundTruth {
        informative_names: syn.informative.iter().map(|&j| syn.dataset.feature_names()[j].clone()).collect(),
        informative: syn.informative.clone(),
    };
    run.write_json("ground_truth.json", &truth)?;
    println!(
        "generated {} instances x {} features ({} informative, {} classes)",
        syn.dataset.len(),
        syn.dataset.feature_count(),
        truth.informative.len(),
        syn.dataset.class_count()
    );
    run.finish(json!({ "synthetic": cfg }), json!({ "informative": truth.informative }))?;
    Ok(())
}
