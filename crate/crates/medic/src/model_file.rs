use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use medic_core::training::TrainConfig;
use medic_core::Model;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

/// Self-describing JSON container for a trained model. Floats are written
/// in shortest round-trip form, so load/save is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub model: Model,
}

impl ModelFile {
    pub fn new(model: Model, config: TrainConfig) -> ModelFile {
        ModelFile { format_version: FORMAT_VERSION, seed: config.seed, config, model }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<ModelFile> {
        let probe: serde_json::Value = serde_json::from_str(text).context("model file is not JSON")?;
        match probe.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => bail!("unsupported model format version {v} (expected {FORMAT_VERSION})"),
            None => bail!("model file has no format_version"),
        }
        let file: ModelFile = serde_json::from_str(text).context("malformed model file")?;
        file.check()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).with_context(|| format!("cannot write `{}`", path.display()))
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read model `{}`", path.display()))?;
        Self::from_json(&text).with_context(|| format!("cannot load model `{}`", path.display()))
    }

    /// Shape consistency between the model's parts.
    fn check(&self) -> Result<()> {
        let m = &self.model;
        m.schema.validate()?;
        let width = m.layout.width;
        let (p, h, n, c) = (m.n_parts(), m.extractor.output, m.n_prototypes(), m.n_classes());
        let e = &m.extractor;
        ensure!(m.masks.width() == width && m.masks.values.data.len() == p * width, "mask shape");
        ensure!(e.input == width && e.w1.len() == e.hidden * width && e.b1.len() == e.hidden, "extractor layer 1 shape");
        ensure!(e.w2.len() == h * e.hidden && e.b2.len() == h, "extractor layer 2 shape");
        ensure!(m.prototypes.dim() == h && m.prototypes.provenance.len() == n, "prototype shape");
        ensure!(m.head.w.cols == n && m.head.b.len() == c && c == m.schema.n_classes(), "head shape");
        let k = m.bins.k;
        let nc = m.schema.n_continuous();
        ensure!(m.bins.centers.len() == nc * k && m.bins.raw_sigma.len() == nc, "binning shape");
        ensure!(m.bins.scale.iter().all(|s| *s > 0.0), "standardization scale must be positive");
        Ok(())
    }
}
