use std::fmt::Write as _;

use super::model::{evaluate, prepare_inputs, Mode};
use super::train::train_joint;
use super::{FusionError, TrainConfig};
use crate::corpus::Corpus;
use crate::embedio::{ContextualFile, WordVectors};
use crate::gcn::GcnConfig;
use crate::metrics::EvalReport;

/// Row labels of the comparison table, in `Mode::ALL` order.
pub const ABLATION_LABELS: [&str; 3] = ["Global features", "Contextual features", "Global + contextual features"];

pub struct AblationInputs<'a> {
    pub train: &'a Corpus,
    pub test: &'a Corpus,
    pub wv: &'a WordVectors,
    pub ctx_train: &'a ContextualFile,
    pub ctx_test: &'a ContextualFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub global_only: EvalReport,
    pub contextual_only: EvalReport,
    pub joint: EvalReport,
}

impl AblationReport {
    pub fn get(&self, mode: Mode) -> &EvalReport {
        match mode {
            Mode::GlobalOnly => &self.global_only,
            Mode::ContextualOnly => &self.contextual_only,
            Mode::Joint => &self.joint,
        }
    }

    /// Overall relaxed F1 per mode, in `Mode::ALL` order.
    pub fn f1(&self) -> [f64; 3] {
        Mode::ALL.map(|m| self.get(m).overall.f1)
    }
}

/// Train and evaluate all three modes with the same configuration and
/// seed; only `cfg.mode` is overridden.
pub fn ablation_run(
    inputs: &AblationInputs<'_>,
    gcn_cfg: &GcnConfig,
    cfg: &TrainConfig,
) -> Result<AblationReport, FusionError> {
    let mut reports = Vec::with_capacity(3);
    for mode in Mode::ALL {
        let run = TrainConfig { mode, ..cfg.clone() };
        let trained = train_joint(inputs.train, Some(inputs.wv), Some(inputs.ctx_train), gcn_cfg, &run)?;
        let test = prepare_inputs(inputs.test, Some(inputs.wv), Some(inputs.ctx_test), mode)?;
        reports.push(evaluate(&trained.model, &test, inputs.test.tagset())?);
    }
    let joint = reports.pop().expect("three runs");
    let contextual_only = reports.pop().expect("three runs");
    let global_only = reports.pop().expect("three runs");
    Ok(AblationReport {
        global_only,
        contextual_only,
        joint,
    })
}

/// Two-column comparison table: feature set and overall F1.
pub fn format_ablation(f1: [f64; 3]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<30} {:>9}", "Embeddings", "F1 scores");
    for (label, value) in ABLATION_LABELS.iter().zip(f1) {
        let _ = writeln!(out, "{label:<30} {value:>9.2}");
    }
    out
}
