//! Two-layer spectral graph convolution over per-sentence dependency
//! graphs.
//!
//! Each sentence becomes an undirected graph (words are nodes, non-root
//! dependency arcs are edges). The propagation operator is the
//! self-looped, symmetrically normalized adjacency
//!
//! ```text
//! Â = D̃^-1/2 (A + I) D̃^-1/2,   D̃_ii = Σ_j (A + I)_ij
//! ```
//!
//! and the network computes `Â · ReLU(Â X W0) · W1`, optionally followed by
//! a row softmax when used as a standalone tagger. Sentences are batched as
//! diagonal blocks of one sparse operator.

mod graph;
mod io;
mod model;
mod train;

use thiserror::Error;

pub use graph::{block_diag, build_graph, normalize_adjacency, NormAdj, SentenceGraph};
pub use io::{read_gcnp, write_gcnp, GCNP_MAGIC, GCNP_VERSION};
pub use model::{
    gcn_backprop, gcn_backward, gcn_forward, gcn_forward_full, gcn_hidden, GcnGrads, GcnParams, GcnTap, GcnTrace,
};
pub use train::{gcn_accuracy, train_gcn, train_gcn_batch, GcnConfig, GcnTrainOutcome, GraphBatch};

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("sentence {0} has no dependency arcs attached")]
    MissingDeps(usize),
    #[error("non-finite loss or parameters after epoch {epoch}")]
    NumericFailure { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not a GCNP block (bad magic)")]
    BadMagic,
    #[error("unsupported GCNP version {0}")]
    BadVersion(u32),
    #[error("GCNP block is truncated")]
    TruncatedFile,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
