use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::Corpus;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub sentences: usize,
    pub documents: usize,
    pub tokens: usize,
    pub entities: usize,
    pub entities_per_type: BTreeMap<String, usize>,
    /// Occurrences of each surface form inside a gold entity span.
    pub entity_mentions_per_surface: BTreeMap<String, usize>,
    /// Second-column tag counts (POS in CoNLL-2003 files).
    pub pos_tags: BTreeMap<String, usize>,
    /// Dependency relation counts; empty when no arcs are attached.
    pub dep_relations: BTreeMap<String, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> Stats {
    let mut stats = Stats::default();
    let mut docs = BTreeSet::new();
    for sentence in corpus.sentences() {
        stats.sentences += 1;
        stats.tokens += sentence.len();
        docs.insert(sentence.doc_id);
        for span in sentence.gold_spans() {
            stats.entities += 1;
            *stats.entities_per_type.entry(span.etype.to_string()).or_default() += 1;
            for token in &sentence.tokens[span.start..=span.end] {
                *stats
                    .entity_mentions_per_surface
                    .entry(token.surface.clone())
                    .or_default() += 1;
            }
        }
        for token in &sentence.tokens {
            if let Some(pos) = &token.pos {
                *stats.pos_tags.entry(pos.clone()).or_default() += 1;
            }
        }
        for arc in sentence.arcs.iter().flatten() {
            *stats.dep_relations.entry(arc.relation.clone()).or_default() += 1;
        }
    }
    stats.documents = docs.len();
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll, Scheme, TagSet};

    #[test]
    fn empty_corpus_has_zero_counts() {
        let corpus = parse_conll("", &TagSet::conll2003(Scheme::Iob1)).unwrap();
        assert_eq!(corpus_stats(&corpus), Stats::default());
    }

    #[test]
    fn counts_surfaces_inside_spans_only() {
        let text = "U.S. NNP I-NP I-LOC\nsaid VBD I-NP O\n\nU.S. NNP I-NP O\nU.S. NNP I-NP I-ORG\n";
        let stats = corpus_stats(&parse_conll(text, &TagSet::conll2003(Scheme::Iob1)).unwrap());
        assert_eq!(stats.entity_mentions_per_surface["U.S."], 2);
        assert_eq!(stats.entities, 2);
        assert_eq!(stats.pos_tags["NNP"], 3);
    }
}
