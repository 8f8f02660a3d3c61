//! `CTXE` container for per-subword contextual vectors.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CTXE" | u32 version (1) | u32 ctx_dim | u32 sentence_count
//! per sentence:
//!   u32 sent_id | u32 subword_count | u32 word_count
//!   subword_count x u8 mask (0 or 1)
//!   subword_count x ctx_dim x f32, row-major
//! ```

use std::io::{self, Read, Write};

use ndarray::Array2;

use super::EmbedError;
use crate::binio::{at_eof, read_f32s, read_u32, to_u32, write_f32s, write_u32};

pub const CTXE_MAGIC: &[u8; 4] = b"CTXE";
pub const CTXE_VERSION: u32 = 1;

/// One bit per subword position: 1 at the first subword of each word,
/// 0 at continuation and padding positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignmentMask(Vec<u8>);

impl AlignmentMask {
    pub fn new(bits: Vec<u8>) -> Result<Self, EmbedError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(EmbedError::BadMaskByte(b));
        }
        Ok(AlignmentMask(bits))
    }

    /// Mask for `words` positions that are all word starts.
    pub fn all_ones(words: usize) -> Self {
        AlignmentMask(vec![1; words])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Subword positions carrying a 1, in order.
    pub fn word_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualSentence {
    pub sent_id: u32,
    pub mask: AlignmentMask,
    /// `mask.len() x ctx_dim`.
    pub vectors: Array2<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextualFile {
    pub ctx_dim: usize,
    pub sentences: Vec<ContextualSentence>,
}

impl ContextualFile {
    /// Check the structural invariants the reader enforces.
    pub fn check(&self) -> Result<(), EmbedError> {
        let mut prev: Option<u32> = None;
        for s in &self.sentences {
            if prev.is_some_and(|p| s.sent_id <= p) {
                return Err(EmbedError::SentIdOrder(s.sent_id));
            }
            prev = Some(s.sent_id);
            if s.vectors.nrows() != s.mask.len() || s.vectors.ncols() != self.ctx_dim {
                return Err(EmbedError::Shape(format!(
                    "sentence {}: vectors are {}x{}, expected {}x{}",
                    s.sent_id,
                    s.vectors.nrows(),
                    s.vectors.ncols(),
                    s.mask.len(),
                    self.ctx_dim
                )));
            }
        }
        Ok(())
    }
}

pub fn write_ctxe<W: Write>(file: &ContextualFile, sink: &mut W) -> Result<(), EmbedError> {
    file.check()?;
    sink.write_all(CTXE_MAGIC)?;
    write_u32(sink, CTXE_VERSION)?;
    write_u32(sink, to_u32(file.ctx_dim)?)?;
    write_u32(sink, to_u32(file.sentences.len())?)?;
    for s in &file.sentences {
        write_u32(sink, s.sent_id)?;
        write_u32(sink, to_u32(s.mask.len())?)?;
        write_u32(sink, to_u32(s.mask.word_count())?)?;
        sink.write_all(s.mask.bits())?;
        write_f32s(sink, s.vectors.iter().copied())?;
    }
    Ok(())
}

pub fn read_ctxe<R: Read>(source: &mut R) -> Result<ContextualFile, EmbedError> {
    read_inner(source).map_err(|e| match e {
        EmbedError::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => EmbedError::TruncatedFile,
        other => other,
    })
}

fn read_inner<R: Read>(r: &mut R) -> Result<ContextualFile, EmbedError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CTXE_MAGIC {
        return Err(EmbedError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != CTXE_VERSION {
        return Err(EmbedError::BadVersion(version));
    }
    let ctx_dim = read_u32(r)? as usize;
    let count = read_u32(r)? as usize;
    let mut sentences = Vec::with_capacity(count.min(1 << 16));
    let mut prev: Option<u32> = None;
    for _ in 0..count {
        let sent_id = read_u32(r)?;
        if prev.is_some_and(|p| sent_id <= p) {
            return Err(EmbedError::SentIdOrder(sent_id));
        }
        prev = Some(sent_id);
        let subwords = read_u32(r)? as usize;
        let words = read_u32(r)? as usize;
        let mut bits = vec![0u8; subwords];
        r.read_exact(&mut bits)?;
        let mask = AlignmentMask::new(bits)?;
        if mask.word_count() != words {
            return Err(EmbedError::MaskSumMismatch { sent_id });
        }
        let data = read_f32s(r, subwords * ctx_dim)?;
        let vectors =
            Array2::from_shape_vec((subwords, ctx_dim), data).map_err(|e| EmbedError::Shape(e.to_string()))?;
        sentences.push(ContextualSentence { sent_id, mask, vectors });
    }
    if !at_eof(r)? {
        return Err(EmbedError::TrailingBytes);
    }
    Ok(ContextualFile { ctx_dim, sentences })
}
