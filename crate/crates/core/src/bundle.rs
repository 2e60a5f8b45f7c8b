//! Versioned model bundles: a directory holding `bundle.json` plus the PCA
//! basis and every network as separate JSON documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};
use crate::inference::Tandem;
use crate::nn::{Mlp, TrainConfig};
use crate::pca::PcaModel;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";
const PCA_FILE: &str = "pca.json";
const FORWARD_FILE: &str = "forward.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseEntry {
    pub alpha: f64,
    pub file: PathBuf,
    pub fingerprint: String,
}

/// Contents of `bundle.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub version: u32,
    pub pca: PathBuf,
    pub forward: PathBuf,
    pub forward_fingerprint: String,
    pub inverse: Vec<InverseEntry>,
    pub config: TrainConfig,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Everything needed for inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub pca: PcaModel,
    pub forward: Mlp,
    /// Sorted by α, no duplicates.
    pub inverse: Vec<(f64, Mlp)>,
    pub config: TrainConfig,
    pub metadata: serde_json::Value,
}

fn inverse_file(alpha: f64) -> String {
    format!("inverse_alpha_{alpha}.json")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GcsError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| GcsError::io(path, e))
}

/// The PCA basis and forward network before any inverse network exists.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardStage {
    pub pca: PcaModel,
    pub forward: Mlp,
    pub config: TrainConfig,
}

impl ForwardStage {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| GcsError::io(dir, e))?;
        write(&dir.join(PCA_FILE), &self.pca.to_json()?)?;
        let meta = serde_json::json!({ "config": self.config });
        write(&dir.join(FORWARD_FILE), &self.forward.to_json(Some(meta))?)
    }

    /// Reads `pca.json` and `forward.json` from a bundle directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let pca = PcaModel::from_json(&read(&dir.join(PCA_FILE))?)?;
        let (forward, meta) = Mlp::from_json(&read(&dir.join(FORWARD_FILE))?)?;
        let config = meta
            .and_then(|m| m.get("config").cloned())
            .map(serde_json::from_value)
            .transpose()?
            .unwrap_or_default();
        Ok(ForwardStage {
            pca,
            forward,
            config,
        })
    }
}

impl Bundle {
    pub fn new(
        pca: PcaModel,
        forward: Mlp,
        mut inverse: Vec<(f64, Mlp)>,
        config: TrainConfig,
    ) -> Result<Self> {
        if inverse.is_empty() {
            return Err(GcsError::Empty("inverse network list"));
        }
        if inverse.iter().any(|(a, _)| !(a.is_finite() && *a >= 0.0)) {
            return Err(GcsError::InvalidInput(
                "alpha values must be finite and non-negative".into(),
            ));
        }
        inverse.sort_by(|a, b| a.0.total_cmp(&b.0));
        if inverse.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(GcsError::InvalidInput("duplicate alpha in bundle".into()));
        }
        pca.validate()?;
        for (_, net) in &inverse {
            Tandem::new(&pca, &forward, net)?;
        }
        Ok(Bundle {
            pca,
            forward,
            inverse,
            config,
            metadata: serde_json::Value::Null,
        })
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.inverse.iter().map(|(a, _)| *a).collect()
    }

    pub fn inverse_for(&self, alpha: f64) -> Option<&Mlp> {
        self.inverse
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, n)| n)
    }

    pub fn tandem(&self, alpha: f64) -> Option<Tandem<'_>> {
        self.inverse_for(alpha).map(|inverse| Tandem {
            pca: &self.pca,
            forward: &self.forward,
            inverse,
        })
    }

    /// Writes every component, then `bundle.json` last so that a partly
    /// written directory never looks complete.
    pub fn save(&self, dir: &Path) -> Result<()> {
        ForwardStage {
            pca: self.pca.clone(),
            forward: self.forward.clone(),
            config: self.config.clone(),
        }
        .save(dir)?;
        let mut inverse = Vec::new();
        for (alpha, net) in &self.inverse {
            let file = inverse_file(*alpha);
            let meta = serde_json::json!({ "alpha": alpha, "config": self.config });
            write(&dir.join(&file), &net.to_json(Some(meta))?)?;
            inverse.push(InverseEntry {
                alpha: *alpha,
                file: file.into(),
                fingerprint: net.fingerprint(),
            });
        }
        let index = BundleIndex {
            version: BUNDLE_FORMAT_VERSION,
            pca: PCA_FILE.into(),
            forward: FORWARD_FILE.into(),
            forward_fingerprint: self.forward.fingerprint(),
            inverse,
            config: self.config.clone(),
            metadata: self.metadata.clone(),
        };
        write(
            &dir.join(BUNDLE_FILE),
            &serde_json::to_string_pretty(&index)?,
        )
    }

    /// Loads and checks a whole bundle; nothing is returned unless every
    /// component reads, matches its version and its recorded fingerprint.
    pub fn load(dir: &Path) -> Result<Self> {
        let text = read(&dir.join(BUNDLE_FILE))?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        let found = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| GcsError::Malformed("bundle.json has no version".into()))?;
        if found != BUNDLE_FORMAT_VERSION as u64 {
            return Err(GcsError::VersionMismatch {
                expected: BUNDLE_FORMAT_VERSION,
                found: found as u32,
            });
        }
        let index: BundleIndex = serde_json::from_value(raw)?;
        let pca = PcaModel::from_json(&read(&dir.join(&index.pca))?)?;
        let (forward, _) = Mlp::from_json(&read(&dir.join(&index.forward))?)?;
        if forward.fingerprint() != index.forward_fingerprint {
            return Err(GcsError::Malformed(
                "forward network does not match its fingerprint".into(),
            ));
        }
        let mut inverse = Vec::new();
        for entry in &index.inverse {
            let (net, _) = Mlp::from_json(&read(&dir.join(&entry.file))?)?;
            if net.fingerprint() != entry.fingerprint {
                return Err(GcsError::Malformed(format!(
                    "inverse network for alpha {} does not match its fingerprint",
                    entry.alpha
                )));
            }
            inverse.push((entry.alpha, net));
        }
        let mut bundle = Bundle::new(pca, forward, inverse, index.config)?;
        bundle.metadata = index.metadata;
        Ok(bundle)
    }
}
