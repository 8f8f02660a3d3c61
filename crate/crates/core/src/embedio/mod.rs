//! Embedding inputs: GloVe-style static vectors and the `CTXE` contextual
//! vector container.

mod ctxe;
mod glove;

use std::fmt;

use thiserror::Error;

use crate::corpus::Corpus;

pub use ctxe::{read_ctxe, write_ctxe, AlignmentMask, ContextualFile, ContextualSentence, CTXE_MAGIC, CTXE_VERSION};
pub use glove::{load_glove, WordVectors};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("line {line}: expected {expected} components, found {found}")]
    DimMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("not a CTXE file (bad magic)")]
    BadMagic,
    #[error("unsupported CTXE version {0}")]
    BadVersion(u32),
    #[error("file is truncated")]
    TruncatedFile,
    #[error("unexpected bytes after the last sentence")]
    TrailingBytes,
    #[error("sentence {sent_id}: mask sum differs from the stored word count")]
    MaskSumMismatch { sent_id: u32 },
    #[error("mask byte {0} is neither 0 nor 1")]
    BadMaskByte(u8),
    #[error("sentence id {0} is not strictly increasing")]
    SentIdOrder(u32),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SentenceCount { file: usize, corpus: usize },
    SentId { index: usize, found: u32 },
    WordCount { sent_id: usize, file: usize, corpus: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SentenceCount { file, corpus } => {
                write!(f, "contextual file has {file} sentences, corpus has {corpus}")
            }
            Violation::SentId { index, found } => {
                write!(f, "sentence {index}: contextual file carries sent_id {found}")
            }
            Violation::WordCount { sent_id, file, corpus } => {
                write!(
                    f,
                    "sentence {sent_id}: contextual file has {file} words, corpus has {corpus}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// The first ten violations.
    pub violations: Vec<Violation>,
    pub total: usize,
}

impl ValidationReport {
    pub const MAX_LISTED: usize = 10;

    pub fn is_ok(&self) -> bool {
        self.total == 0
    }

    pub(crate) fn push(&mut self, v: Violation) {
        self.total += 1;
        if self.violations.len() < Self::MAX_LISTED {
            self.violations.push(v);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        writeln!(f, "{} violation(s)", self.total)?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Pair file sentences with corpus sentences by position and compare
/// counts.
pub fn validate_ctxe_against_corpus(file: &ContextualFile, corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    if file.sentences.len() != corpus.len() {
        report.push(Violation::SentenceCount {
            file: file.sentences.len(),
            corpus: corpus.len(),
        });
    }
    for (index, (cs, s)) in file.sentences.iter().zip(corpus.sentences()).enumerate() {
        if cs.sent_id as usize != index {
            report.push(Violation::SentId {
                index,
                found: cs.sent_id,
            });
        }
        let words = cs.mask.word_count();
        if words != s.len() {
            report.push(Violation::WordCount {
                sent_id: s.sent_id,
                file: words,
                corpus: s.len(),
            });
        }
    }
    report
}
