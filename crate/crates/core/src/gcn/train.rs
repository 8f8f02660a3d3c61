use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    block_diag, build_graph, gcn_backward, gcn_forward_full, normalize_adjacency, GcnError, GcnParams, NormAdj,
};
use crate::corpus::Corpus;
use crate::embedio::WordVectors;
use crate::nn::{argmax, Dropout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcnConfig {
    pub hidden_dim: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden_dim: 128,
            dropout: 0.5,
            learning_rate: 0.05,
            epochs: 300,
            seed: 7,
        }
    }
}

impl GcnConfig {
    pub fn check(&self) -> Result<(), GcnError> {
        if self.hidden_dim == 0 {
            return Err(GcnError::Config("hidden_dim must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GcnError::Config(format!("dropout {} is outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// All sentences of a corpus as one block-diagonal graph with stacked
/// node features and gold label indices.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub x: Array2<f64>,
    pub adj: NormAdj,
    pub gold: Vec<usize>,
}

impl GraphBatch {
    pub fn from_corpus(corpus: &Corpus, wv: &WordVectors) -> Result<Self, GcnError> {
        let tagset = corpus.tagset();
        let mut blocks = Vec::with_capacity(corpus.len());
        let mut rows = Vec::with_capacity(corpus.len());
        let mut gold = Vec::new();
        for sentence in corpus.sentences() {
            let arcs = sentence.arcs.as_ref().ok_or(GcnError::MissingDeps(sentence.sent_id))?;
            blocks.push(normalize_adjacency(&build_graph(arcs, sentence.len())?));
            let surfaces: Vec<&str> = sentence.tokens.iter().map(|t| t.surface.as_str()).collect();
            rows.push(wv.features(&surfaces));
            gold.extend(
                sentence
                    .tokens
                    .iter()
                    .map(|t| tagset.index(t.gold_tag).expect("parsed tags are in the tag set")),
            );
        }
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        let x = if views.is_empty() {
            Array2::zeros((0, wv.dim()))
        } else {
            ndarray::concatenate(Axis(0), &views).map_err(|e| GcnError::ShapeMismatch(e.to_string()))?
        };
        Ok(GraphBatch {
            x,
            adj: block_diag(&blocks),
            gold,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GcnTrainOutcome {
    pub params: GcnParams,
    /// Training loss at the start of each epoch (before its update).
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent of the standalone classifier
/// `softmax(Â ReLU(Â X W0) W1)` over every sentence at once.
pub fn train_gcn(corpus: &Corpus, wv: &WordVectors, cfg: &GcnConfig) -> Result<GcnTrainOutcome, GcnError> {
    cfg.check()?;
    let batch = GraphBatch::from_corpus(corpus, wv)?;
    train_gcn_batch(&batch, corpus.tagset().len(), cfg)
}

pub fn train_gcn_batch(batch: &GraphBatch, classes: usize, cfg: &GcnConfig) -> Result<GcnTrainOutcome, GcnError> {
    cfg.check()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = GcnParams::init(batch.x.ncols(), cfg.hidden_dim, classes, &mut init_rng);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut dropout = Dropout::with_rng(cfg.dropout, dropout_rng);
    let loss_mask = vec![true; batch.gold.len()];

    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (grads, loss) = gcn_backward(
            &batch.x,
            &batch.adj,
            &params,
            &batch.gold,
            &loss_mask,
            Some(&mut dropout),
        )?;
        params.w0.scaled_add(-cfg.learning_rate, &grads.w0);
        params.w1.scaled_add(-cfg.learning_rate, &grads.w1);
        if !loss.is_finite() || !params.is_finite() {
            return Err(GcnError::NumericFailure { epoch });
        }
        losses.push(loss);
    }
    Ok(GcnTrainOutcome { params, losses })
}

/// Node-level accuracy with dropout off.
pub fn gcn_accuracy(params: &GcnParams, batch: &GraphBatch) -> Result<f64, GcnError> {
    if batch.gold.is_empty() {
        return Ok(0.0);
    }
    let probs = gcn_forward_full(&batch.x, &batch.adj, params, None)?;
    let correct = probs
        .rows()
        .into_iter()
        .zip(&batch.gold)
        .filter(|(row, &g)| argmax(row.view()) == g)
        .count();
    Ok(correct as f64 / batch.gold.len() as f64)
}
