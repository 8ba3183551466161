use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use fad_core::attribution::make_baseline;
use fad_core::nncore::{train, LabeledSlice, NetworkSpec};
use fad_core::numeric::derive_seed;
use fad_core::pipeline::{validation_split, Standardizer};
use serde_json::json;

use crate::config::RunConfig;
use crate::model::{load_dataset, ModelFile, MODEL_FORMAT, MODEL_VERSION};
use crate::run::Run;

const TAG_VALIDATION: u64 = 3;

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// CSV with a header row and a `label` column.
    #[arg(long)]
    pub data: PathBuf,
    /// Feature-kind sidecar JSON [default: <data>.kinds.json if present].
    #[arg(long)]
    pub kinds: Option<PathBuf>,
    /// JSON config; its `train` section and `fad.hidden` /
    /// `fad.validation_fraction` are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Hidden layer widths, e.g. `32,16,8`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
}

pub fn run(ctx: &crate::run::Context, args: TrainArgs) -> Result<()> {
    let mut run = Run::start(ctx, "train")?;
    let mut config = RunConfig::load(&mut run, args.config.as_deref())?;
    if let Some(e) = args.epochs {
        config.train.epochs = e;
    }
    if let Some(h) = args.hidden {
        config.fad.hidden = h;
    }
    if let Some(v) = args.validation_fraction {
        config.fad.validation_fraction = v;
    }
    config.train.validate()?;
    if !(0.0..0.5).contains(&config.fad.validation_fraction) {
        return Err(fad_core::FadError::Config("validation fraction must lie in [0, 0.5)".into()).into());
    }
    let data = load_dataset(&mut run, &args.data, args.kinds.as_deref(), None)?;

    let all: Vec<usize> = (0..data.len()).collect();
    let (fit_idx, val_idx) = validation_split(
        &all,
        data.labels(),
        config.fad.validation_fraction,
        derive_seed(config.train.seed, &[TAG_VALIDATION]),
    );
    let fit_raw: Vec<Vec<f64>> = fit_idx.iter().map(|&i| data.rows()[i].clone()).collect();
    let scaler = Standardizer::fit(&fit_raw, data.kinds())?;
    let fit_x = scaler.apply_all(&fit_raw);
    let fit_y: Vec<usize> = fit_idx.iter().map(|&i| data.labels()[i]).collect();
    let val_x: Vec<Vec<f64>> = val_idx.iter().map(|&i| scaler.apply(&data.rows()[i])).collect();
    let val_y: Vec<usize> = val_idx.iter().map(|&i| data.labels()[i]).collect();

    let spec = NetworkSpec::new(data.feature_count(), config.fad.hidden.clone(), data.class_count());
    let validation = if val_x.is_empty() { None } else { Some(LabeledSlice::new(&val_x, &val_y)?) };
    let outcome = train(LabeledSlice::new(&fit_x, &fit_y)?, validation, &spec, &config.train)?;
    let net = outcome.network;

    let accuracy = |xs: &[Vec<f64>], ys: &[usize]| -> Result<Option<f64>> {
        if xs.is_empty() {
            return Ok(None);
        }
        let mut hits = 0usize;
        for (x, &y) in xs.iter().zip(ys) {
            hits += usize::from(net.predict(x)? == y);
        }
        Ok(Some(hits as f64 / xs.len() as f64))
    };
    let train_accuracy = accuracy(&fit_x, &fit_y)?;
    let validation_accuracy = accuracy(&val_x, &val_y)?;

    let model = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        feature_names: data.feature_names().to_vec(),
        class_names: data.class_names().to_vec(),
        kinds: data.kinds().to_vec(),
        baseline: make_baseline(&fit_x, data.kinds())?.values().to_vec(),
        standardizer: scaler,
        train: config.train.clone(),
        selected_epoch: outcome.selected_epoch,
        network: net.to_document(),
    };
    run.write_json("model.json", &model)?;

    let mut trace = String::from("epoch,train_loss,validation_loss\n");
    for e in &outcome.trace {
        let _ = writeln!(
            trace,
            "{},{},{}",
            e.epoch,
            e.train_loss,
            e.validation_loss.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    run.write("loss_trace.csv", trace)?;

    println!(
        "trained {} parameters; selected epoch {}; train accuracy {}",
        spec.parameter_count(),
        outcome.selected_epoch,
        train_accuracy.map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    run.finish(
        json!({ "train": config.train, "hidden": config.fad.hidden, "validation_fraction": config.fad.validation_fraction }),
        json!({
            "parameters": spec.parameter_count(),
            "train_size": fit_idx.len(),
            "validation_size": val_idx.len(),
            "selected_epoch": outcome.selected_epoch,
            "final_train_accuracy": train_accuracy,
            "validation_accuracy": validation_accuracy,
            "final_train_loss": outcome.trace.last().map(|e| e.train_loss),
        }),
    )?;
    Ok(())
}
