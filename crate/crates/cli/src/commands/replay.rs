use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser};

use crate::run::{read_file, FileDigest, RunManifest, MANIFEST_FORMAT};
use crate::{dispatch, Cli, Command};

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

/// Checks the recorded inputs, re-runs the recorded command line from the
/// recorded working directory into `--out` (default: the original output
/// directory) and compares every output digest.
pub fn run(ctx: &crate::run::Context, args: ReplayArgs) -> Result<()> {
    let text = String::from_utf8(read_file(&args.manifest)?)?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(fad_core::FadError::from)
        .with_context(|| format!("invalid manifest {}", args.manifest.display()))?;
    if manifest.format != MANIFEST_FORMAT {
        bail!(fad_core::FadError::Config(format!("{} is not a run manifest", args.manifest.display())));
    }
    for input in &manifest.inputs {
        let bytes = read_file(std::path::Path::new(&input.path))?;
        if FileDigest::of(input.path.clone(), &bytes) != *input {
            bail!(fad_core::FadError::Config(format!("input {} changed since the recorded run", input.path)));
        }
    }

    let out = if ctx.argv.iter().any(|a| a == "--out" || a.starts_with("--out=")) {
        std::env::current_dir()?.join(&ctx.out)
    } else {
        PathBuf::from(&manifest.out_dir)
    };
    let mut cli = Cli::try_parse_from(&manifest.argv).context("recorded command line no longer parses")?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!(fad_core::FadError::Config("cannot replay a replay".into()));
    }
    cli.out = Some(out.clone());
    std::env::set_current_dir(&manifest.cwd).with_context(|| format!("cannot enter {}", manifest.cwd))?;
    dispatch(cli, manifest.argv.clone())?;

    let mut mismatched = Vec::new();
    for output in &manifest.outputs {
        let bytes = read_file(&out.join(&output.path))?;
        if FileDigest::of(output.path.clone(), &bytes) != *output {
            mismatched.push(output.path.clone());
        }
    }
    if !mismatched.is_empty() {
        bail!(fad_core::FadError::Config(format!("outputs differ from the manifest: {}", mismatched.join(", "))));
    }
    println!("replayed {}: {} outputs identical", manifest.command, manifest.outputs.len());
    Ok(())
}
