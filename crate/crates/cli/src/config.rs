//! JSON run configuration shared by the subcommands.

use std::path::Path;

use anyhow::{Context as _, Result};
use fad_core::nncore::TrainConfig;
use fad_core::pipeline::{FadConfig, VitalFewConfig};
use serde::{Deserialize, Serialize};

use crate::run::Run;

/// Every section is optional; missing fields take their defaults.
///
/// ```json
/// { "train": { "epochs": 50 }, "fad": { "beta": 20, "methods": ["ig", "shapley"] } }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub fad: FadConfig,
    pub synthetic: VitalFewConfig,
}

impl RunConfig {
    pub fn load(run: &mut Run, path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = run.input_text(p)?;
                serde_json::from_str(&text)
                    .map_err(fad_core::FadError::from)
                    .with_context(|| format!("invalid config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        let ctx = run.ctx();
        if ctx.seed_given || path.is_none() {
            config.train.seed = ctx.seed;
            config.fad.seed = ctx.seed;
            config.synthetic.seed = ctx.seed;
        }
        Ok(config)
    }
}
