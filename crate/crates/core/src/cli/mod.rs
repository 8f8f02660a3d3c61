//! `nerfuse` command line: `train`, `eval`, `predict`, `validate`, `stats`
//! and `ablate`.
//!
//! Settings come from a flat TOML file (`--config`) with flags taking
//! precedence. Every command writes `<out>/report.json` echoing the
//! resolved configuration. Exit codes: 0 success, 2 configuration error,
//! 3 data error, 4 numeric failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embedio::EmbedError;
use crate::fusion::{FusionError, Mode};
use crate::gcn::{GcnError, GcnTap};
use crate::optim::OptimizerKind;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        let msg = e.to_string();
        match e {
            FusionError::MissingInput(_) | FusionError::Config(_) | FusionError::Gcn(GcnError::Config(_)) => {
                CliError::Config(msg)
            }
            FusionError::NumericFailure { .. } | FusionError::Gcn(GcnError::NumericFailure { .. }) => {
                CliError::Numeric(msg)
            }
            _ => CliError::Data(msg),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GcnError> for CliError {
    fn from(e: GcnError) -> Self {
        FusionError::from(e).into()
    }
}

#[derive(Debug, Parser)]
#[command(name = "nerfuse", version, about = "GCN + contextual-embedding named-entity tagger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// global_only, contextual_only or joint.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// sgd or adam.
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    /// Dropout on the fused classifier input (0 disables it).
    #[arg(long)]
    dropout: Option<f64>,
    /// GCN layer whose output is the global feature block: layer1 or layer2.
    #[arg(long, value_parser = parse_tap)]
    gcn_tap: Option<GcnTap>,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "sgd" => Ok(OptimizerKind::Sgd),
        "adam" => Ok(OptimizerKind::Adam),
        _ => Err(format!("unknown optimizer {s:?}")),
    }
}

fn parse_tap(s: &str) -> Result<GcnTap, String> {
    match s {
        "layer1" => Ok(GcnTap::Layer1),
        "layer2" => Ok(GcnTap::Layer2),
        _ => Err(format!("unknown GCN tap {s:?}")),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: FusionError| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it with a run report.
    Train(Common),
    /// Score a model on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Append predicted tags to a CoNLL file.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Check that all inputs for the mode agree with each other.
    Validate(Common),
    /// Corpus statistics of the training split.
    Stats(Common),
    /// Train and score all three feature modes.
    Ablate(Common),
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = common.mode {
        cfg.mode = mode;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(optimizer) = common.optimizer {
        cfg.optimizer = optimizer;
    }
    if let Some(dropout) = common.dropout {
        cfg.dropout = dropout;
    }
    if let Some(tap) = common.gcn_tap {
        cfg.gcn_tap = tap;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => commands::train(resolve(&c)?),
        Command::Eval { common, model } => {
            let mut cfg = resolve(&common)?;
            cfg.model = model.or(cfg.model);
            commands::eval(cfg)
        }
        Command::Predict { common, model, input } => {
            let mut cfg = resolve(&common)?;
            cfg.model = model.or(cfg.model);
            cfg.input = input.or(cfg.input);
            commands::predict(cfg)
        }
        Command::Validate(c) => commands::validate(resolve(&c)?),
        Command::Stats(c) => commands::stats(resolve(&c)?),
        Command::Ablate(c) => commands::ablate(resolve(&c)?),
    }
}

/// Parse `args` (program name first), run the command and return the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Data(String::new()).exit_code(), 3);
        assert_eq!(CliError::Numeric(String::new()).exit_code(), 4);
        assert_eq!(CliError::from(FusionError::NumericFailure { epoch: 1 }).exit_code(), 4);
        assert_eq!(CliError::from(FusionError::MissingInput("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(FusionError::BadMagic).exit_code(), 3);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "nerfuse",
            "train",
            "--seed",
            "9",
            "--mode",
            "global_only",
            "--out",
            "x",
            "--optimizer",
            "adam",
            "--dropout",
            "0.1",
            "--gcn-tap",
            "layer1",
        ])
        .unwrap();
        let Command::Train(c) = cli.command else { panic!() };
        let cfg = resolve(&c).unwrap();
        assert_eq!((cfg.seed, cfg.mode, cfg.out), (9, Mode::GlobalOnly, PathBuf::from("x")));
        assert_eq!(
            (cfg.optimizer, cfg.dropout, cfg.gcn_tap),
            (OptimizerKind::Adam, 0.1, GcnTap::Layer1)
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["nerfuse", "frobnicate"]), 2);
        assert_eq!(run(["nerfuse", "train", "--mode", "both"]), 2);
    }
}
