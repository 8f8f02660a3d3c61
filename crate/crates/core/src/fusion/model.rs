use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::align::{align_global, fuse, gather_words};
use super::head::{check_targets, cross_entropy_grad, head_forward, HeadTrace, JointParams};
use super::FusionError;
use crate::corpus::{iob_to_spans, Corpus, Scheme, Tag, TagSet};
use crate::embedio::{validate_ctxe_against_corpus, AlignmentMask, ContextualFile, WordVectors};
use crate::gcn::{
    block_diag, build_graph, gcn_backprop, gcn_forward, normalize_adjacency, GcnGrads, GcnParams, GcnTap, GcnTrace,
    NormAdj,
};
use crate::metrics::{relaxed_prf, EvalReport};
use crate::nn::{argmax, Dropout};

/// Which feature blocks feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    GlobalOnly,
    ContextualOnly,
    #[default]
    Joint,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::GlobalOnly, Mode::ContextualOnly, Mode::Joint];

    pub fn uses_global(self) -> bool {
        self != Mode::ContextualOnly
    }

    pub fn uses_contextual(self) -> bool {
        self != Mode::GlobalOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GlobalOnly => "global_only",
            Mode::ContextualOnly => "contextual_only",
            Mode::Joint => "joint",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| FusionError::Config(format!("unknown mode {s:?}")))
    }
}

/// A trained tagger: optional GCN plus the linear head.
///
/// Head input rows are `[global | contextual]`; either block is absent
/// (width 0) in the single-source modes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    mode: Mode,
    tap: GcnTap,
    gcn: Option<GcnParams>,
    pub head: JointParams,
}

impl JointModel {
    pub fn new(mode: Mode, tap: GcnTap, gcn: Option<GcnParams>, head: JointParams) -> Result<Self, FusionError> {
        if mode.uses_global() != gcn.is_some() {
            return Err(FusionError::Config(format!(
                "mode {mode} {} GCN parameters",
                if mode.uses_global() { "needs" } else { "takes no" }
            )));
        }
        if tap == GcnTap::Layer1 && gcn.as_ref().is_some_and(|g| g.output_dim() != 0) {
            return Err(FusionError::Config(
                "a first-layer tap keeps no second GCN layer".into(),
            ));
        }
        let global_dim = gcn.as_ref().map_or(0, |g| g.feature_dim(tap));
        if mode.uses_global() && global_dim == 0 {
            return Err(FusionError::Config("global feature width is zero".into()));
        }
        if head.input_dim() < global_dim || (mode == Mode::Joint && head.input_dim() == global_dim) {
            return Err(FusionError::ShapeMismatch(format!(
                "head takes {} inputs, global block alone is {global_dim}",
                head.input_dim()
            )));
        }
        if mode == Mode::GlobalOnly && head.input_dim() != global_dim {
            return Err(FusionError::ShapeMismatch(format!(
                "global-only head takes {} inputs, global block is {global_dim}",
                head.input_dim()
            )));
        }
        Ok(JointModel { mode, tap, gcn, head })
    }

    /// Fresh Glorot-initialized model. `global_dim` is ignored for a
    /// first-layer tap, whose feature width is `gcn_hidden`.
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng>(
        mode: Mode,
        tap: GcnTap,
        glove_dim: usize,
        gcn_hidden: usize,
        global_dim: usize,
        ctx_dim: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self, FusionError> {
        let gcn = mode.uses_global().then(|| {
            let out = if tap == GcnTap::Layer1 { 0 } else { global_dim };
            GcnParams::init(glove_dim, gcn_hidden, out, rng)
        });
        let g = gcn.as_ref().map_or(0, |g| g.feature_dim(tap));
        let c = if mode.uses_contextual() { ctx_dim } else { 0 };
        let head = JointParams::init(g + c, classes, rng);
        Self::new(mode, tap, gcn, head)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn tap(&self) -> GcnTap {
        self.tap
    }

    pub fn gcn(&self) -> Option<&GcnParams> {
        self.gcn.as_ref()
    }

    pub fn gcn_mut(&mut self) -> Option<&mut GcnParams> {
        self.gcn.as_mut()
    }

    /// Width of the global block, 0 without a GCN.
    pub fn global_dim(&self) -> usize {
        self.gcn.as_ref().map_or(0, |g| g.feature_dim(self.tap))
    }

    pub fn ctx_dim(&self) -> usize {
        self.head.input_dim() - self.global_dim()
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn is_finite(&self) -> bool {
        self.head.is_finite() && self.gcn.as_ref().is_none_or(GcnParams::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointGrads {
    pub w_out: Array2<f64>,
    pub b: Array1<f64>,
    pub gcn: Option<GcnGrads>,
}

impl JointGrads {
    pub fn zeros_like(m: &JointModel) -> Self {
        JointGrads {
            w_out: Array2::zeros(m.head.w_out.raw_dim()),
            b: Array1::zeros(m.head.b.len()),
            gcn: m.gcn().map(GcnGrads::zeros_like),
        }
    }
}

/// Everything one sentence contributes to training or prediction.
#[derive(Debug, Clone)]
pub struct SentenceInput {
    pub sent_id: usize,
    /// GloVe rows, one per word.
    pub x: Option<Array2<f64>>,
    pub adj: Option<NormAdj>,
    /// Contextual rows, one per subword position.
    pub ctx: Option<Array2<f64>>,
    /// All ones (one position per word) when there is no contextual block.
    pub mask: AlignmentMask,
    /// Gold tag indices in word order.
    pub gold: Vec<usize>,
}

impl SentenceInput {
    pub fn word_count(&self) -> usize {
        self.gold.len()
    }
}

/// Build per-sentence inputs for `mode`. Inputs the mode does not use are
/// ignored entirely, so `contextual_only` needs neither GloVe nor arcs.
pub fn prepare_inputs(
    corpus: &Corpus,
    wv: Option<&WordVectors>,
    ctx: Option<&ContextualFile>,
    mode: Mode,
) -> Result<Vec<SentenceInput>, FusionError> {
    let ctx = if mode.uses_contextual() {
        let file = ctx.ok_or_else(|| FusionError::MissingInput("contextual embeddings (CTXE)".into()))?;
        let report = validate_ctxe_against_corpus(file, corpus);
        if !report.is_ok() {
            return Err(FusionError::Validation(report));
        }
        Some(file)
    } else {
        None
    };
    let wv = if mode.uses_global() {
        Some(wv.ok_or_else(|| FusionError::MissingInput("GloVe word vectors".into()))?)
    } else {
        None
    };

    let tagset = corpus.tagset();
    let mut inputs = Vec::with_capacity(corpus.len());
    for (i, sentence) in corpus.sentences().iter().enumerate() {
        let (x, adj) = match wv {
            Some(wv) => {
                let arcs = sentence.arcs.as_ref().ok_or_else(|| {
                    FusionError::MissingInput(format!("dependency arcs for sentence {}", sentence.sent_id))
                })?;
                let surfaces: Vec<&str> = sentence.tokens.iter().map(|t| t.surface.as_str()).collect();
                let graph = build_graph(arcs, sentence.len())?;
                (Some(wv.features(&surfaces)), Some(normalize_adjacency(&graph)))
            }
            None => (None, None),
        };
        let (ctx_rows, mask) = match ctx {
            Some(file) => {
                let cs = &file.sentences[i];
                (Some(cs.vectors.mapv(f64::from)), cs.mask.clone())
            }
            None => (None, AlignmentMask::all_ones(sentence.len())),
        };
        let gold = sentence
            .tokens
            .iter()
            .map(|t| tagset.index(t.gold_tag).expect("parsed tags are in the tag set"))
            .collect();
        inputs.push(SentenceInput {
            sent_id: sentence.sent_id,
            x,
            adj,
            ctx: ctx_rows,
            mask,
            gold,
        });
    }
    Ok(inputs)
}

/// Several sentences stacked: graphs as diagonal blocks, subword rows and
/// masks concatenated in order.
struct Batch {
    x: Option<Array2<f64>>,
    adj: Option<NormAdj>,
    ctx: Option<Array2<f64>>,
    mask: AlignmentMask,
    gold: Vec<usize>,
}

fn stack(parts: Vec<&Array2<f64>>) -> Result<Array2<f64>, FusionError> {
    let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| FusionError::ShapeMismatch(e.to_string()))
}

fn missing(what: &str, sent_id: usize) -> FusionError {
    FusionError::MissingInput(format!("{what} for sentence {sent_id}"))
}

fn assemble(m: &JointModel, inputs: &[&SentenceInput]) -> Result<Batch, FusionError> {
    let mut bits = Vec::new();
    let mut gold = Vec::new();
    for s in inputs {
        if s.mask.word_count() != s.gold.len() {
            return Err(FusionError::MaskSumMismatch {
                rows: s.gold.len(),
                mask_sum: s.mask.word_count(),
            });
        }
        bits.extend_from_slice(s.mask.bits());
        gold.extend_from_slice(&s.gold);
    }
    let mask = AlignmentMask::new(bits)?;

    let (x, adj) = if m.mode.uses_global() {
        let mut xs = Vec::with_capacity(inputs.len());
        let mut blocks = Vec::with_capacity(inputs.len());
        for s in inputs {
            xs.push(s.x.as_ref().ok_or_else(|| missing("GloVe features", s.sent_id))?);
            blocks.push(s.adj.clone().ok_or_else(|| missing("dependency graph", s.sent_id))?);
        }
        let c = m.gcn().map_or(0, GcnParams::input_dim);
        let x = if xs.is_empty() {
            Array2::zeros((0, c))
        } else {
            stack(xs)?
        };
        (Some(x), Some(block_diag(&blocks)))
    } else {
        (None, None)
    };

    let ctx = if m.mode.uses_contextual() {
        let mut rows = Vec::with_capacity(inputs.len());
        for s in inputs {
            let c = s.ctx.as_ref().ok_or_else(|| missing("contextual vectors", s.sent_id))?;
            if c.nrows() != s.mask.len() {
                return Err(FusionError::ShapeMismatch(format!(
                    "sentence {}: {} contextual rows for a mask of length {}",
                    s.sent_id,
                    c.nrows(),
                    s.mask.len()
                )));
            }
            rows.push(c);
        }
        Some(if rows.is_empty() {
            Array2::zeros((0, m.ctx_dim()))
        } else {
            stack(rows)?
        })
    } else {
        None
    };
    Ok(Batch {
        x,
        adj,
        ctx,
        mask,
        gold,
    })
}

struct Trace {
    gcn: Option<GcnTrace>,
    head: HeadTrace,
}

fn forward(
    m: &JointModel,
    batch: &Batch,
    gcn_dropout: Option<&mut Dropout>,
    head_dropout: Option<&mut Dropout>,
) -> Result<Trace, FusionError> {
    let gcn_trace = match (&m.gcn, &batch.x, &batch.adj) {
        (Some(p), Some(x), Some(adj)) => Some(gcn_forward(x, adj, p, m.tap, gcn_dropout)?),
        _ => None,
    };
    let global = gcn_trace
        .as_ref()
        .map(|t| align_global(&t.out, &batch.mask))
        .transpose()?;
    let fused = match (global, &batch.ctx) {
        (Some(g), Some(c)) => fuse(&g, c)?,
        (Some(g), None) => g,
        (None, Some(c)) => c.clone(),
        (None, None) => unreachable!("every mode uses at least one block"),
    };
    let head = head_forward(&fused, &m.head, head_dropout)?;
    Ok(Trace { gcn: gcn_trace, head })
}

/// Mean cross-entropy over the batch's words and the gradients of every
/// parameter tensor.
fn loss_and_grads(
    m: &JointModel,
    batch: &Batch,
    gcn_dropout: Option<&mut Dropout>,
    head_dropout: Option<&mut Dropout>,
) -> Result<(f64, JointGrads), FusionError> {
    let trace = forward(m, batch, gcn_dropout, head_dropout)?;
    let probs = &trace.head.probs;
    check_targets(probs, &batch.gold, &batch.mask)?;
    let words = batch.gold.len();
    if words == 0 {
        return Ok((0.0, JointGrads::zeros_like(m)));
    }
    let (loss, d_logits) = cross_entropy_grad(probs, &batch.gold, &batch.mask, 1.0 / words as f64);

    let w_out = trace.head.input.t().dot(&d_logits);
    let b = d_logits.sum_axis(Axis(0));
    let gcn = match (&m.gcn, &trace.gcn, &batch.x, &batch.adj) {
        (Some(p), Some(gt), Some(x), Some(adj)) => {
            let g = m.global_dim();
            let mut d_global = d_logits.dot(&m.head.w_out.slice(s![..g, ..]).t());
            if let Some(mask) = &trace.head.drop_mask {
                d_global *= &mask.slice(s![.., ..g]);
            }
            let d_words = gather_words(&d_global, &batch.mask);
            Some(gcn_backprop(gt, x, adj, p, &d_words))
        }
        _ => None,
    };
    Ok((loss, JointGrads { w_out, b, gcn }))
}

pub(crate) struct Droppers {
    pub gcn: Dropout,
    pub head: Dropout,
}

pub(crate) fn train_step_grads(
    m: &JointModel,
    inputs: &[&SentenceInput],
    drop: &mut Droppers,
) -> Result<(f64, usize, JointGrads), FusionError> {
    let batch = assemble(m, inputs)?;
    let words = batch.gold.len();
    let (loss, grads) = loss_and_grads(m, &batch, Some(&mut drop.gcn), Some(&mut drop.head))?;
    Ok((loss, words, grads))
}

/// Deterministic (dropout off) batch loss and analytic gradients over all
/// of `inputs` as one batch.
pub fn batch_loss_and_grads(m: &JointModel, inputs: &[SentenceInput]) -> Result<(f64, JointGrads), FusionError> {
    let refs: Vec<&SentenceInput> = inputs.iter().collect();
    loss_and_grads(m, &assemble(m, &refs)?, None, None)
}

pub fn batch_loss(m: &JointModel, inputs: &[SentenceInput]) -> Result<f64, FusionError> {
    Ok(batch_loss_and_grads(m, inputs)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub sent_id: usize,
    /// One label per word.
    pub tags: Vec<Tag>,
    /// Word x T distributions.
    pub probs: Array2<f64>,
}

/// Tag one sentence with dropout off. Only first-subword rows are read;
/// ties go to the lowest tag index.
pub fn predict(m: &JointModel, input: &SentenceInput, tagset: &TagSet) -> Result<Prediction, FusionError> {
    if tagset.len() != m.classes() {
        return Err(FusionError::ShapeMismatch(format!(
            "model has {} classes, tag set has {}",
            m.classes(),
            tagset.len()
        )));
    }
    let batch = assemble(m, &[input])?;
    let trace = forward(m, &batch, None, None)?;
    let probs = gather_words(&trace.head.probs, &input.mask);
    let tags = probs.rows().into_iter().map(|row| tagset.tag(argmax(row))).collect();
    Ok(Prediction {
        sent_id: input.sent_id,
        tags,
        probs,
    })
}

/// Relaxed span scores of the model's predictions against the gold tags
/// carried by `inputs`.
pub fn evaluate(m: &JointModel, inputs: &[SentenceInput], tagset: &TagSet) -> Result<EvalReport, FusionError> {
    let mut gold = Vec::with_capacity(inputs.len());
    let mut pred = Vec::with_capacity(inputs.len());
    for input in inputs {
        let p = predict(m, input, tagset)?;
        let gold_tags: Vec<Tag> = input.gold.iter().map(|&g| tagset.tag(g)).collect();
        gold.push(iob_to_spans(&gold_tags, Scheme::Iob2));
        pred.push(iob_to_spans(&p.tags, Scheme::Iob2));
    }
    Ok(relaxed_prf(&gold, &pred)?)
}

/// Fraction of words whose argmax tag equals the gold tag.
pub fn token_accuracy(m: &JointModel, inputs: &[SentenceInput], tagset: &TagSet) -> Result<f64, FusionError> {
    let mut correct = 0;
    let mut total = 0;
    for input in inputs {
        let p = predict(m, input, tagset)?;
        total += input.gold.len();
        correct += p
            .tags
            .iter()
            .zip(&input.gold)
            .filter(|(t, &g)| tagset.index(**t) == Some(g))
            .count();
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}
