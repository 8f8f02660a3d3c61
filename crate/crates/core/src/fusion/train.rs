use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{prepare_inputs, train_step_grads, Droppers, JointGrads, JointModel, Mode, SentenceInput};
use super::FusionError;
use crate::corpus::Corpus;
use crate::embedio::{ContextualFile, WordVectors};
use crate::gcn::{GcnConfig, GcnTap};
use crate::nn::Dropout;
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Dropout on the fused head input.
    pub dropout: f64,
    pub seed: u64,
    pub mode: Mode,
    pub optimizer: OptimizerKind,
    pub gcn_tap: GcnTap,
    /// Width of the global block with a second-layer tap.
    pub global_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 5e-5,
            epochs: 4,
            dropout: 0.5,
            seed: 0,
            mode: Mode::Joint,
            optimizer: OptimizerKind::Sgd,
            gcn_tap: GcnTap::Layer2,
            global_dim: 128,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), FusionError> {
        if self.batch_size == 0 {
            return Err(FusionError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(FusionError::Config(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(FusionError::Config(format!(
                "dropout {} is outside [0, 1)",
                self.dropout
            )));
        }
        if self.mode.uses_global() && self.gcn_tap == GcnTap::Layer2 && self.global_dim == 0 {
            return Err(FusionError::Config("global_dim must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: JointModel,
    /// Word-weighted mean training loss of each epoch (dropout on).
    pub losses: Vec<f64>,
}

/// Minibatch training of the tagger for `cfg.mode`.
///
/// The seed drives separate ChaCha streams: parameter init (0), the
/// per-epoch sentence shuffle (1) and dropout (2 for the GCN, 3 for the
/// head). In joint mode the GCN is trained end to end through the head.
pub fn train_joint(
    corpus: &Corpus,
    wv: Option<&WordVectors>,
    ctx: Option<&ContextualFile>,
    gcn_cfg: &GcnConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, FusionError> {
    cfg.check()?;
    if cfg.mode.uses_global() {
        gcn_cfg.check()?;
    }
    let inputs = prepare_inputs(corpus, wv, ctx, cfg.mode)?;
    let glove_dim = wv.map_or(0, WordVectors::dim);
    let ctx_dim = ctx.map_or(0, |c| c.ctx_dim);
    train_inputs(&inputs, glove_dim, ctx_dim, corpus.tagset().len(), gcn_cfg, cfg)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn update(opt: &mut Optimizer, slot: usize, param: &mut Array2<f64>, grad: &Array2<f64>) {
    let p = param.as_slice_mut().expect("parameters are contiguous");
    let g = grad.as_standard_layout();
    opt.update(slot, p, g.as_slice().expect("standard layout"));
}

fn apply(model: &mut JointModel, grads: &JointGrads, opt: &mut Optimizer) {
    opt.begin_step();
    update(opt, 0, &mut model.head.w_out, &grads.w_out);
    let b = model.head.b.as_slice_mut().expect("bias is contiguous");
    opt.update(1, b, grads.b.as_slice().expect("bias gradient is contiguous"));
    if let (Some(p), Some(g)) = (model.gcn_mut(), &grads.gcn) {
        update(opt, 2, &mut p.w0, &g.w0);
        update(opt, 3, &mut p.w1, &g.w1);
    }
}

pub(crate) fn train_inputs(
    inputs: &[SentenceInput],
    glove_dim: usize,
    ctx_dim: usize,
    classes: usize,
    gcn_cfg: &GcnConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, FusionError> {
    let mut model = JointModel::init(
        cfg.mode,
        cfg.gcn_tap,
        glove_dim,
        gcn_cfg.hidden_dim,
        cfg.global_dim,
        ctx_dim,
        classes,
        &mut stream(cfg.seed, 0),
    )?;
    let mut shuffle_rng = stream(cfg.seed, 1);
    let mut drop = Droppers {
        gcn: Dropout::with_rng(gcn_cfg.dropout, stream(cfg.seed, 2)),
        head: Dropout::with_rng(cfg.dropout, stream(cfg.seed, 3)),
    };
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut words = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SentenceInput> = chunk.iter().map(|&i| &inputs[i]).collect();
            let (loss, n, grads) = train_step_grads(&model, &batch, &mut drop)?;
            total += loss * n as f64;
            words += n;
            apply(&mut model, &grads, &mut opt);
        }
        let loss = if words == 0 { 0.0 } else { total / words as f64 };
        if !loss.is_finite() || !model.is_finite() {
            return Err(FusionError::NumericFailure { epoch });
        }
        log::debug!("epoch {epoch}: loss {loss:.6}");
        losses.push(loss);
    }
    Ok(TrainOutcome { model, losses })
}
