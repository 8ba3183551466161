//! Output directories, file digests and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context as _, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Cli;

pub const MANIFEST_FORMAT: &str = "fadx-manifest";
pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_OUT: &str = "fadx-out";

#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub seed_given: bool,
    pub jobs: usize,
    pub out: PathBuf,
    pub argv: Vec<String>,
}

impl Context {
    pub fn from_cli(cli: &Cli, argv: Vec<String>) -> Self {
        Self {
            seed: cli.seed.unwrap_or(0),
            seed_given: cli.seed.is_some(),
            jobs: cli.jobs,
            out: cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            argv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: impl Into<String>, bytes: &[u8]) -> Self {
        Self { path: path.into(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() as u64 }
    }
}

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub core_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub cwd: String,
    pub out_dir: String,
    pub seed: u64,
    pub jobs: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to `out_dir`. The manifest itself is not listed.
    pub outputs: Vec<FileDigest>,
    pub summary: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

/// One command execution: collects input digests and written outputs,
/// then writes the manifest.
pub struct Run {
    ctx: Context,
    command: String,
    started: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Run {
    pub fn start(ctx: &Context, command: &str) -> Result<Self> {
        fs::create_dir_all(&ctx.out).with_context(|| format!("cannot create {}", ctx.out.display()))?;
        Ok(Self { ctx: ctx.clone(), command: command.to_string(), started: unix_now(), inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn ctx(&self) -> &Context {
        &self.ctx
    }

    /// Reads an input file and records its digest.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = read_file(path)?;
        let shown = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        self.inputs.push(FileDigest::of(shown.display().to_string(), &bytes));
        Ok(bytes)
    }

    pub fn input_text(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.input(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.ctx.out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes.as_ref()).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.retain(|d| d.path != rel);
        self.outputs.push(FileDigest::of(rel, bytes.as_ref()));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    pub fn finish(self, config: serde_json::Value, summary: serde_json::Value) -> Result<RunManifest> {
        let cwd = std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default();
        let out_dir = fs::canonicalize(&self.ctx.out).unwrap_or(self.ctx.out.clone());
        let manifest = RunManifest {
            format: MANIFEST_FORMAT.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: fad_core::VERSION.to_string(),
            command: self.command,
            argv: self.ctx.argv.clone(),
            cwd,
            out_dir: out_dir.display().to_string(),
            seed: self.ctx.seed,
            jobs: self.ctx.jobs,
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            summary,
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.ctx.out.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(manifest)
    }
}
