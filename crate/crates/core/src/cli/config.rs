use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::corpus::Scheme;
use crate::fusion::{Mode, TrainConfig};
use crate::gcn::{GcnConfig, GcnTap};
use crate::optim::OptimizerKind;

/// Fully resolved run settings. Relative paths in a config file are taken
/// relative to that file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub train_deps: Option<PathBuf>,
    pub train_ctxe: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub test_deps: Option<PathBuf>,
    pub test_ctxe: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub input_deps: Option<PathBuf>,
    pub input_ctxe: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    /// Model file; `<out>/model.fuse` when unset.
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub scheme: Scheme,
    pub mode: Mode,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub gcn_tap: GcnTap,
    pub global_dim: usize,
    pub gcn_hidden_dim: usize,
    pub gcn_dropout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let g = GcnConfig::default();
        RunConfig {
            train: None,
            train_deps: None,
            train_ctxe: None,
            test: None,
            test_deps: None,
            test_ctxe: None,
            input: None,
            input_deps: None,
            input_ctxe: None,
            glove: None,
            model: None,
            out: PathBuf::from("out"),
            scheme: Scheme::Iob1,
            mode: t.mode,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            dropout: t.dropout,
            seed: t.seed,
            optimizer: t.optimizer,
            gcn_tap: t.gcn_tap,
            global_dim: t.global_dim,
            gcn_hidden_dim: g.hidden_dim,
            gcn_dropout: g.dropout,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.train,
            &mut self.train_deps,
            &mut self.train_ctxe,
            &mut self.test,
            &mut self.test_deps,
            &mut self.test_ctxe,
            &mut self.input,
            &mut self.input_deps,
            &mut self.input_ctxe,
            &mut self.glove,
            &mut self.model,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.fuse"))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            dropout: self.dropout,
            seed: self.seed,
            mode: self.mode,
            optimizer: self.optimizer,
            gcn_tap: self.gcn_tap,
            global_dim: self.global_dim,
        }
    }

    /// Only the GCN width and dropout apply to end-to-end training; the
    /// joint run's seed and learning rate drive the GCN as well.
    pub fn gcn_config(&self) -> GcnConfig {
        GcnConfig {
            hidden_dim: self.gcn_hidden_dim,
            dropout: self.gcn_dropout,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        self.train_config()
            .check()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.mode.uses_global() {
            self.gcn_config().check().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
