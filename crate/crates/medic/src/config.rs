use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use medic_core::training::TrainConfig;

/// Reads a TOML training config; absent keys keep their defaults.
pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config `{}`", path.display()))
}

/// Config file plus per-field command-line overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    /// TOML file with training settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bins per continuous feature
    #[arg(long)]
    pub bins: Option<usize>,
    /// Number of patching masks
    #[arg(long)]
    pub parts: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub n_prototypes: Option<usize>,
    #[arg(long)]
    pub lambda_sparsity: Option<f64>,
    #[arg(long)]
    pub lambda_diversity: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs_stage1: Option<usize>,
    #[arg(long)]
    pub epochs_stage2: Option<usize>,
    #[arg(long)]
    pub epochs_stage3: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Disable inverse-frequency class weights in the loss
    #[arg(long)]
    pub unweighted: bool,
}

impl ConfigOverrides {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(
            seed,
            bins,
            parts,
            hidden_dim,
            n_prototypes,
            lambda_sparsity,
            lambda_diversity,
            learning_rate,
            batch_size,
            epochs_stage1,
            epochs_stage2,
            epochs_stage3,
            patience
        );
        if self.unweighted {
            cfg.class_weighting = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
