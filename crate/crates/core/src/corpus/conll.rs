use std::io::Read;

use super::{to_iob2, Corpus, CorpusError, Sentence, Tag, TagSet, Token};

/// How the last column of a token line is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConllMode {
    /// At least two columns; the last one is the gold tag.
    Tagged,
    /// Any number of columns; only the first (surface) is read and every
    /// gold tag is `O`. Used for prediction input.
    Untagged,
}

/// Parse a CoNLL-2003 column file. Tags are validated against `tagset` and
/// normalized to IOB2.
pub fn parse_conll(text: &str, tagset: &TagSet) -> Result<Corpus, CorpusError> {
    parse_conll_with(text, tagset, ConllMode::Tagged)
}

pub fn read_conll<R: Read>(mut reader: R, tagset: &TagSet, mode: ConllMode) -> Result<Corpus, CorpusError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_conll_with(&text, tagset, mode)
}

pub(crate) fn parse_conll_with(text: &str, tagset: &TagSet, mode: ConllMode) -> Result<Corpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut doc_id = 0;
    let mut doc_has_sentences = false;

    let flush = |tokens: &mut Vec<Token>, doc_id: usize, sentences: &mut Vec<Sentence>| -> bool {
        if tokens.is_empty() {
            return false;
        }
        let sent_id = sentences.len();
        sentences.push(Sentence {
            tokens: std::mem::take(tokens),
            doc_id,
            sent_id,
            arcs: None,
        });
        true
    };

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            doc_has_sentences |= flush(&mut tokens, doc_id, &mut sentences);
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols[0] == "-DOCSTART-" {
            doc_has_sentences |= flush(&mut tokens, doc_id, &mut sentences);
            if doc_has_sentences {
                doc_id += 1;
                doc_has_sentences = false;
            }
            continue;
        }
        let gold_tag = match mode {
            ConllMode::Tagged => {
                if cols.len() < 2 {
                    return Err(CorpusError::MalformedLine {
                        line: line_no,
                        reason: format!("expected at least 2 columns, found {}", cols.len()),
                    });
                }
                let label = cols[cols.len() - 1];
                match label.parse::<Tag>() {
                    Ok(tag) if tagset.contains(tag) => tag,
                    _ => {
                        return Err(CorpusError::UnknownTag {
                            line: line_no,
                            label: label.to_string(),
                        })
                    }
                }
            }
            ConllMode::Untagged => Tag::O,
        };
        let pos = match mode {
            ConllMode::Tagged if cols.len() >= 3 => Some(cols[1].to_string()),
            ConllMode::Untagged if cols.len() >= 2 => Some(cols[1].to_string()),
            _ => None,
        };
        tokens.push(Token {
            surface: cols[0].to_string(),
            gold_tag,
            pos,
            line: line_no,
        });
    }
    flush(&mut tokens, doc_id, &mut sentences);

    for sentence in &mut sentences {
        let normalized = to_iob2(&sentence.gold_tags(), tagset.scheme());
        for (token, tag) in sentence.tokens.iter_mut().zip(normalized) {
            token.gold_tag = tag;
        }
    }
    Ok(Corpus::new(tagset.clone(), sentences))
}
