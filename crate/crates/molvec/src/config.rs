//! Training settings: command-line flags override the config file, which
//! overrides the built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use molvec_core::optim::OptimizerConfig;
use molvec_core::pvns::{NegSamplingConfig, TrainConfig, VectorUpdate};
use molvec_core::readout::{DEFAULT_FP_DIM, DEFAULT_HIDDEN};
use molvec_core::semisup::{SemiConfig, DEFAULT_LAMBDA};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Every field optional; absent means "not set at this layer".
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file with any of the settings below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Embedding dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Total levels, counting the atom embedding
    #[arg(long = "L", visible_alias = "levels")]
    pub levels: Option<usize>,
    /// Negatives per anchor
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_reject: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// adam or sgd
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Draw negatives from this many uniformly sampled molecules per step
    #[arg(long)]
    pub negative_pool: Option<usize>,
    #[arg(long)]
    pub anchor_fraction: Option<f64>,
    /// Per-anchor step size for molecule vectors; 0 updates them with the
    /// shared optimizer once per batch instead
    #[arg(long)]
    pub vector_lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub d_fp: Option<usize>,
    #[arg(long)]
    pub n_hidden: Option<usize>,
}

impl Settings {
    /// Fields set here win over fields set in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            config: self.config.or(lower.config),
            d: self.d.or(lower.d),
            levels: self.levels.or(lower.levels),
            k: self.k.or(lower.k),
            gamma: self.gamma.or(lower.gamma),
            max_reject: self.max_reject.or(lower.max_reject),
            epochs: self.epochs.or(lower.epochs),
            seed: self.seed.or(lower.seed),
            optimizer: self.optimizer.or(lower.optimizer),
            lr: self.lr.or(lower.lr),
            batch_size: self.batch_size.or(lower.batch_size),
            negative_pool: self.negative_pool.or(lower.negative_pool),
            anchor_fraction: self.anchor_fraction.or(lower.anchor_fraction),
            vector_lr: self.vector_lr.or(lower.vector_lr),
            lambda: self.lambda.or(lower.lambda),
            d_fp: self.d_fp.or(lower.d_fp),
            n_hidden: self.n_hidden.or(lower.n_hidden),
        }
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Flags over the file named by `--config` (if any).
    pub fn layered(self) -> Result<Settings> {
        match &self.config {
            Some(path) => {
                let file = Settings::from_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }

    pub fn neg(&self) -> NegSamplingConfig {
        let base = NegSamplingConfig::default();
        NegSamplingConfig {
            k: self.k.unwrap_or(base.k),
            gamma: self.gamma.unwrap_or(base.gamma),
            max_reject: self.max_reject.unwrap_or(base.max_reject),
        }
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let base = TrainConfig::default();
        let lr = self.lr.unwrap_or(base.optimizer.lr());
        let optimizer = match self.optimizer.as_deref() {
            None | Some("adam") => OptimizerConfig::adam(lr),
            Some("sgd") => OptimizerConfig::Sgd { lr },
            Some(other) => return Err(CliError::Usage(format!("unknown optimizer {other:?} (adam or sgd)"))),
        };
        let vector_update = match self.vector_lr {
            None => base.vector_update,
            Some(0.0) => VectorUpdate::Batch,
            Some(lr) => VectorUpdate::PerAnchor { lr },
        };
        Ok(TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            optimizer,
            seed: self.seed.unwrap_or(base.seed),
            levels: self.levels.unwrap_or(base.levels),
            d: self.d.unwrap_or(base.d),
            anchor_fraction: self.anchor_fraction.unwrap_or(base.anchor_fraction),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            negative_pool: self.negative_pool.or(base.negative_pool),
            vector_update,
        })
    }

    pub fn semi(&self) -> Result<SemiConfig> {
        Ok(SemiConfig {
            lambda: self.lambda.unwrap_or(DEFAULT_LAMBDA),
            train: self.train()?,
            neg: self.neg(),
            d_fp: self.d_fp.unwrap_or(DEFAULT_FP_DIM),
            n_hidden: self.n_hidden.unwrap_or(DEFAULT_HIDDEN),
        })
    }

    /// `(key, value)` pairs of the fully resolved configuration.
    pub fn snapshot(&self) -> Result<Vec<(&'static str, String)>> {
        let t = self.train()?;
        let s = self.semi()?;
        let (opt, lr) = match t.optimizer {
            OptimizerConfig::Adam { lr, .. } => ("adam", lr),
            OptimizerConfig::Sgd { lr } => ("sgd", lr),
        };
        let vector_lr = match t.vector_update {
            VectorUpdate::Batch => 0.0,
            VectorUpdate::PerAnchor { lr } => lr,
        };
        Ok(vec![
            ("d", t.d.to_string()),
            ("levels", t.levels.to_string()),
            ("k", s.neg.k.to_string()),
            ("gamma", format!("{:?}", s.neg.gamma)),
            ("max_reject", s.neg.max_reject.to_string()),
            ("epochs", t.epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("optimizer", opt.to_string()),
            ("lr", format!("{lr:?}")),
            ("batch_size", t.batch_size.to_string()),
            ("negative_pool", t.negative_pool.map_or("none".into(), |p| p.to_string())),
            ("anchor_fraction", format!("{:?}", t.anchor_fraction)),
            ("vector_lr", format!("{vector_lr:?}")),
            ("lambda", format!("{:?}", s.lambda)),
            ("d_fp", s.d_fp.to_string()),
            ("n_hidden", s.n_hidden.to_string()),
        ])
    }
}
