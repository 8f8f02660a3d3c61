//! Joint tagger: GCN global features are placed at first-subword
//! positions, concatenated with contextual vectors and decoded by a single
//! linear-softmax layer.

mod ablation;
mod align;
mod head;
mod io;
mod model;
mod train;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embedio::{EmbedError, ValidationReport};
use crate::gcn::GcnError;
use crate::metrics::MetricsError;

pub use ablation::{ablation_run, format_ablation, AblationInputs, AblationReport, ABLATION_LABELS};
pub use align::{align_global, fuse, gather_words};
pub use head::{classifier_forward, masked_cross_entropy, JointParams};
pub use io::{read_fuse, write_fuse, FUSE_MAGIC, FUSE_VERSION};
pub use model::{
    batch_loss, batch_loss_and_grads, evaluate, predict, prepare_inputs, token_accuracy, JointGrads, JointModel, Mode,
    Prediction, SentenceInput,
};
pub use train::{train_joint, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{rows} feature rows but the mask marks {mask_sum} words")]
    MaskSumMismatch { rows: usize, mask_sum: usize },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("contextual file does not match the corpus: {0}")]
    Validation(ValidationReport),
    #[error("non-finite loss or parameters after epoch {epoch}")]
    NumericFailure { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not a FUSE model file (bad magic)")]
    BadMagic,
    #[error("unsupported FUSE version {0}")]
    BadVersion(u32),
    #[error("model file is truncated")]
    TruncatedFile,
    #[error(transparent)]
    Gcn(#[from] GcnError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
