//! Generated corpora for feature-ablation experiments.
//!
//! Half of the entities are lexical: a handful of surfaces per type that
//! always carry that type, with a type cue in their static vector and
//! nothing in their contextual rows. The other half use ambiguous surfaces
//! whose static vector is shared and uninformative; their type is only
//! readable from a cue written into the contextual rows at that position.
//! Global features alone therefore miss the ambiguous half and contextual
//! features alone miss the lexical half.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, DepArc, EntityType, Head, Scheme, Sentence, Tag, TagSet, Token};
use crate::embedio::{AlignmentMask, ContextualFile, ContextualSentence, WordVectors};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub glove_dim: usize,
    pub ctx_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train_sentences: 200,
            test_sentences: 100,
            glove_dim: 16,
            ctx_dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Corpus,
    pub test: Corpus,
    pub wv: WordVectors,
    pub ctx_train: ContextualFile,
    pub ctx_test: ContextualFile,
}

const LEXICAL_PER_TYPE: usize = 3;
const AMBIGUOUS: usize = 4;
const FILLERS: usize = 30;
/// Channels 0..5 of a contextual row hold the cue (one per type, then O).
const CUE_CHANNELS: usize = 5;

#[derive(Clone, Copy)]
enum Word {
    Lexical(EntityType, usize),
    Ambiguous(usize, Option<EntityType>),
    Filler(usize),
}

impl Word {
    fn surface(self) -> String {
        match self {
            Word::Lexical(t, i) => format!("{}{i}", t.as_str().to_lowercase()),
            Word::Ambiguous(i, _) => format!("amb{i}"),
            Word::Filler(i) => format!("w{i}"),
        }
    }

    fn tag(self) -> Tag {
        match self {
            Word::Lexical(t, _) | Word::Ambiguous(_, Some(t)) => Tag::B(t),
            _ => Tag::O,
        }
    }
}

fn type_index(t: EntityType) -> usize {
    EntityType::ALL.iter().position(|&x| x == t).expect("listed")
}

fn noise<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    rng.random_range(-scale..=scale)
}

fn vocabulary(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> WordVectors {
    assert!(
        cfg.glove_dim > 4 && cfg.ctx_dim > CUE_CHANNELS,
        "dimensions too small for the cue channels"
    );
    let mut wv = WordVectors::new(cfg.glove_dim);
    let mut add = |surface: String, cue: Option<usize>, rng: &mut ChaCha8Rng| {
        let v: Vec<f32> = (0..cfg.glove_dim)
            .map(|d| {
                let base = if d < 4 { 0.0 } else { noise(rng, 1.0) };
                let signal = if cue == Some(d) { 1.0 } else { 0.0 };
                (base + signal) as f32
            })
            .collect();
        wv.insert(&surface, &v).expect("dimension is fixed");
    };
    for t in EntityType::ALL {
        for i in 0..LEXICAL_PER_TYPE {
            add(Word::Lexical(t, i).surface(), Some(type_index(t)), rng);
        }
    }
    for i in 0..AMBIGUOUS {
        add(Word::Ambiguous(i, None).surface(), None, rng);
    }
    for i in 0..FILLERS {
        add(Word::Filler(i).surface(), None, rng);
    }
    wv
}

fn sentence_words(rng: &mut ChaCha8Rng) -> Vec<Word> {
    let len = rng.random_range(6..=10);
    let mut words: Vec<Word> = (0..len).map(|_| Word::Filler(rng.random_range(0..FILLERS))).collect();
    let lexical = rng.random_range(1..=2);
    let ambiguous = rng.random_range(1..=2);
    // Entities sit at even positions so no two are adjacent.
    let mut slots: Vec<usize> = (0..len).step_by(2).collect();
    for k in 0..lexical + ambiguous {
        if slots.is_empty() {
            break;
        }
        let slot = slots.swap_remove(rng.random_range(0..slots.len()));
        let t = *EntityType::ALL.choose(rng).expect("non-empty");
        words[slot] = if k < lexical {
            Word::Lexical(t, rng.random_range(0..LEXICAL_PER_TYPE))
        } else {
            // One ambiguous occurrence in five is not an entity.
            let etype = if rng.random_range(0..5) == 0 { None } else { Some(t) };
            Word::Ambiguous(rng.random_range(0..AMBIGUOUS), etype)
        };
    }
    words
}

fn contextual_rows(words: &[Word], ctx_dim: usize, rng: &mut ChaCha8Rng) -> (AlignmentMask, Array2<f32>) {
    let mut bits = Vec::new();
    let mut rows: Vec<Vec<f32>> = Vec::new();
    let row = |cue: Option<usize>, rng: &mut ChaCha8Rng| -> Vec<f32> {
        (0..ctx_dim)
            .map(|d| {
                if d < CUE_CHANNELS {
                    if cue == Some(d) {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    noise(rng, 1.0) as f32
                }
            })
            .collect()
    };
    for &w in words {
        let cue = match w {
            Word::Ambiguous(_, t) => Some(t.map_or(4, type_index)),
            _ => None,
        };
        bits.push(1);
        rows.push(row(cue, rng));
        for _ in 0..rng.random_range(0..=1) {
            bits.push(0);
            rows.push(row(None, rng));
        }
    }
    let n = rows.len();
    let flat: Vec<f32> = rows.into_iter().flatten().collect();
    (
        AlignmentMask::new(bits).expect("0/1 bits"),
        Array2::from_shape_vec((n, ctx_dim), flat).expect("rectangular"),
    )
}

fn split(cfg: &SynthConfig, count: usize, rng: &mut ChaCha8Rng) -> (Corpus, ContextualFile) {
    let mut sentences = Vec::with_capacity(count);
    let mut ctx = Vec::with_capacity(count);
    for sent_id in 0..count {
        let words = sentence_words(rng);
        let (mask, vectors) = contextual_rows(&words, cfg.ctx_dim, rng);
        // Random dependency tree: every word after the first attaches to
        // an earlier one.
        let arcs = (0..words.len())
            .map(|i| DepArc {
                dependent: i,
                head: if i == 0 {
                    Head::Root
                } else {
                    Head::Token(rng.random_range(0..i))
                },
                relation: if i == 0 { "root".into() } else { "dep".into() },
            })
            .collect();
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token {
                surface: w.surface(),
                gold_tag: w.tag(),
                pos: None,
                line: i + 1,
            })
            .collect();
        sentences.push(Sentence {
            tokens,
            doc_id: 0,
            sent_id,
            arcs: Some(arcs),
        });
        ctx.push(ContextualSentence {
            sent_id: sent_id as u32,
            mask,
            vectors,
        });
    }
    (
        Corpus::new(TagSet::conll2003(Scheme::Iob2), sentences),
        ContextualFile {
            ctx_dim: cfg.ctx_dim,
            sentences: ctx,
        },
    )
}

pub fn synth_corpus(cfg: &SynthConfig) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let wv = vocabulary(cfg, &mut rng);
    let (train, ctx_train) = split(cfg, cfg.train_sentences, &mut rng);
    let (test, ctx_test) = split(cfg, cfg.test_sentences, &mut rng);
    SynthData {
        train,
        test,
        wv,
        ctx_train,
        ctx_test,
    }
}
