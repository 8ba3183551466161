mod commands;
mod config;
mod model;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fad_core::FadError;

#[derive(Parser, Debug, Clone)]
#[command(name = "fadx", version, about = "Train classifiers, attribute their predictions and score attributions with FAD curves")]
pub struct Cli {
    /// Base seed for every random choice. Overrides seeds in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; 0 uses one per core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Output directory [default: fadx-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Generate a synthetic "vital few" dataset with known informative features.
    Gen(commands::gen::GenArgs),
    /// Train a classifier on a CSV dataset.
    Train(commands::train::TrainArgs),
    /// Attribute a trained model's predictions on a dataset.
    Attribute(commands::attribute::AttributeArgs),
    /// Build FAD curves and the N-AUC table.
    Fad(commands::fad::FadArgs),
    /// Assign mention embeddings to lexicon concepts by cosine similarity.
    Match(commands::matching::MatchArgs),
    /// Re-run a command from its manifest and compare output digests.
    Replay(commands::replay::ReplayArgs),
}

/// Runs a parsed command line; `argv` is recorded in the manifest.
pub fn dispatch(cli: Cli, argv: Vec<String>) -> anyhow::Result<()> {
    let ctx = run::Context::from_cli(&cli, argv);
    match cli.command {
        Command::Gen(args) => commands::gen::run(&ctx, args),
        Command::Train(args) => commands::train::run(&ctx, args),
        Command::Attribute(args) => commands::attribute::run(&ctx, args),
        Command::Fad(args) => commands::fad::run(&ctx, args),
        Command::Match(args) => commands::matching::run(&ctx, args),
        Command::Replay(args) => commands::replay::run(&ctx, args),
    }
}

/// 2 for input and validation errors, 3 for numeric failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<FadError>())
        .map_or(2, |e| if e.is_numeric() { 3 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        log::warn!("thread pool: {e}");
    }
    match dispatch(cli, std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
