//! In-memory NER corpus: CoNLL-2003 token columns, CoNLL-U dependency
//! arcs, IOB tag handling and corpus statistics.
//!
//! Gold tags are normalized to IOB2 as soon as a file is parsed, whatever
//! scheme the file was written in. Everything downstream (span decoding,
//! training targets, evaluation) therefore sees a single scheme.

mod conll;
mod conllu;
mod iob;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conll::{parse_conll, read_conll, ConllMode};
pub use conllu::{parse_conllu_deps, read_conllu_deps};
pub use iob::{decode_spans, iob_to_spans, spans_to_iob, to_iob2, DecodedSpans};
pub use stats::{corpus_stats, Stats};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed line ({reason})")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: unknown tag `{label}`")]
    UnknownTag { line: usize, label: String },
    #[error("line {line}: head index {head} out of range for a sentence of {len} tokens")]
    BadHeadIndex { line: usize, head: usize, len: usize },
    #[error("dependency count mismatch: {what}")]
    CountMismatch { what: String },
    #[error("invalid tag set: {0}")]
    InvalidTagSet(String),
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpanError {
    #[error("spans {first:?} and {second:?} overlap")]
    Overlap { first: EntitySpan, second: EntitySpan },
    #[error("span {span:?} is out of range for a sentence of {len} tokens")]
    OutOfRange { span: EntitySpan, len: usize },
}

/// The four CoNLL-2003 entity types.
///
/// Declaration order is alphabetical, which is also the row order used by
/// evaluation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "MISC")]
    Misc,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "PER")]
    Per,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [EntityType::Loc, EntityType::Misc, EntityType::Org, EntityType::Per];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Loc => "LOC",
            EntityType::Misc => "MISC",
            EntityType::Org => "ORG",
            EntityType::Per => "PER",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LOC" => Ok(EntityType::Loc),
            "MISC" => Ok(EntityType::Misc),
            "ORG" => Ok(EntityType::Org),
            "PER" => Ok(EntityType::Per),
            _ => Err(()),
        }
    }
}

/// A single IOB label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(EntityType),
    I(EntityType),
}

impl Tag {
    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            Tag::O => None,
            Tag::B(t) | Tag::I(t) => Some(t),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(t) => write!(f, "B-{t}"),
            Tag::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for Tag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let (prefix, etype) = s.split_once('-').ok_or(())?;
        let etype = etype.parse()?;
        match prefix {
            "B" => Ok(Tag::B(etype)),
            "I" => Ok(Tag::I(etype)),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `B-` only marks a span that directly follows a span of the same type.
    #[default]
    Iob1,
    /// Every span starts with `B-`.
    Iob2,
}

/// Ordered label inventory. A label's position is its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    labels: Vec<Tag>,
    scheme: Scheme,
}

impl TagSet {
    pub fn new(labels: Vec<Tag>, scheme: Scheme) -> Result<Self, CorpusError> {
        if !labels.contains(&Tag::O) {
            return Err(CorpusError::InvalidTagSet("missing `O`".into()));
        }
        for (i, tag) in labels.iter().enumerate() {
            if labels[..i].contains(tag) {
                return Err(CorpusError::InvalidTagSet(format!("duplicate label {tag}")));
            }
        }
        Ok(TagSet { labels, scheme })
    }

    /// `O` followed by B-/I- for PER, LOC, ORG, MISC (nine labels).
    pub fn conll2003(scheme: Scheme) -> Self {
        let mut labels = vec![Tag::O];
        for t in [EntityType::Per, EntityType::Loc, EntityType::Org, EntityType::Misc] {
            labels.push(Tag::B(t));
            labels.push(Tag::I(t));
        }
        TagSet { labels, scheme }
    }

    pub fn labels(&self) -> &[Tag] {
        &self.labels
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, tag: Tag) -> Option<usize> {
        self.labels.iter().position(|&t| t == tag)
    }

    pub fn tag(&self, index: usize) -> Tag {
        self.labels[index]
    }

    pub fn contains(&self, tag: Tag) -> bool {
        self.labels.contains(&tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub gold_tag: Tag,
    /// Second column of the source line, when the file carries one.
    pub pos: Option<String>,
    /// 1-based line number in the source file.
    pub line: usize,
}

/// Inclusive token range with an entity type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub etype: EntityType,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, etype: EntityType) -> Self {
        EntitySpan { start, end, etype }
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    Root,
    Token(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepArc {
    pub dependent: usize,
    pub head: Head,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub doc_id: usize,
    pub sent_id: usize,
    pub arcs: Option<Vec<DepArc>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gold_tags(&self) -> Vec<Tag> {
        self.tokens.iter().map(|t| t.gold_tag).collect()
    }

    /// Gold spans; tags are already IOB2 so no repairs can occur.
    pub fn gold_spans(&self) -> Vec<EntitySpan> {
        iob_to_spans(&self.gold_tags(), Scheme::Iob2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    tagset: TagSet,
    sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(tagset: TagSet, sentences: Vec<Sentence>) -> Self {
        Corpus { tagset, sentences }
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn has_deps(&self) -> bool {
        !self.sentences.is_empty() && self.sentences.iter().all(|s| s.arcs.is_some())
    }

    /// Attach one arc list per sentence. Fails unless the sentence counts
    /// and every per-sentence token count agree.
    pub fn with_deps(mut self, deps: Vec<Vec<DepArc>>) -> Result<Corpus, CorpusError> {
        if deps.len() != self.sentences.len() {
            return Err(CorpusError::CountMismatch {
                what: format!("{} dependency trees for {} sentences", deps.len(), self.sentences.len()),
            });
        }
        for (sentence, arcs) in self.sentences.iter_mut().zip(deps) {
            if arcs.len() != sentence.len() {
                return Err(CorpusError::CountMismatch {
                    what: format!(
                        "sentence {} has {} tokens but {} arcs",
                        sentence.sent_id,
                        sentence.len(),
                        arcs.len()
                    ),
                });
            }
            sentence.arcs = Some(arcs);
        }
        Ok(self)
    }
}
