//! Trained model file and dataset loading.

use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use fad_core::attribution::{BaselineVector, FeatureKind};
use fad_core::nncore::{DenseNetwork, NetworkDocument, TrainConfig};
use fad_core::pipeline::{DatasetSidecar, Standardizer, TabularDataset};
use fad_core::FadError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::Run;

pub const MODEL_FORMAT: &str = "fadx-model";
pub const MODEL_VERSION: u32 = 1;

/// Network plus the preprocessing needed to apply it to raw rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub standardizer: Standardizer,
    /// Attribution baseline in standardised space.
    pub baseline: Vec<f64>,
    pub train: TrainConfig,
    pub selected_epoch: usize,
    pub network: NetworkDocument,
}

impl ModelFile {
    /// Returns the file, its network and the file's SHA-256.
    pub fn load(run: &mut Run, path: &Path) -> Result<(Self, DenseNetwork, String)> {
        let bytes = run.input(path)?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let file: ModelFile = serde_json::from_str(&text)
            .map_err(FadError::from)
            .with_context(|| format!("invalid model file {}", path.display()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(FadError::Config(format!(
                "{} is not a {MODEL_FORMAT} v{MODEL_VERSION} file",
                path.display()
            ))
            .into());
        }
        let net = DenseNetwork::from_document(file.network.clone())?;
        Ok((file, net, sha256))
    }

    pub fn baseline(&self) -> Result<BaselineVector> {
        Ok(BaselineVector::custom(self.baseline.clone())?)
    }

    /// Standardised rows of `data`, after checking that its columns match.
    pub fn prepare(&self, data: &TabularDataset) -> Result<Vec<Vec<f64>>> {
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(FadError::Shape(format!(
                "dataset has {} features, model expects {} (names must match in order)",
                data.feature_count(),
                self.feature_names.len()
            ))
            .into());
        }
        Ok(self.standardizer.apply_all(data.rows()))
    }
}

/// `data.csv` pairs with `data.kinds.json` when `--kinds` is not given.
pub fn default_sidecar(data: &Path) -> Option<PathBuf> {
    let p = data.with_extension("kinds.json");
    p.exists().then_some(p)
}

/// Loads a CSV dataset and its feature-kind sidecar. When `classes` is set
/// (from a model file) labels are mapped onto that class order.
pub fn load_dataset(
    run: &mut Run,
    data: &Path,
    kinds: Option<&Path>,
    classes: Option<&[String]>,
) -> Result<TabularDataset> {
    let sidecar_path = kinds.map(Path::to_path_buf).or_else(|| default_sidecar(data));
    let mut sidecar = match &sidecar_path {
        Some(p) => {
            let text = run.input_text(p)?;
            Some(
                serde_json::from_str::<DatasetSidecar>(&text)
                    .map_err(FadError::from)
                    .with_context(|| format!("invalid sidecar {}", p.display()))?,
            )
        }
        None => None,
    };
    if let Some(classes) = classes {
        sidecar.get_or_insert_with(DatasetSidecar::default).classes = Some(classes.to_vec());
    }
    let bytes = run.input(data)?;
    TabularDataset::from_csv(bytes.as_slice(), sidecar.as_ref()).with_context(|| format!("in {}", data.display()))
}
