use std::io::Read;

use super::{CorpusError, DepArc, Head};

/// Parse CoNLL-U into one arc list per sentence with 0-based token indices.
///
/// Comment lines, multiword ranges (`1-2`) and empty nodes (`1.1`) are
/// skipped. HEAD `0` becomes [`Head::Root`].
pub fn parse_conllu_deps(text: &str) -> Result<Vec<Vec<DepArc>>, CorpusError> {
    let mut out = Vec::new();
    // (line number, id, head, relation)
    let mut pending: Vec<(usize, usize, usize, String)> = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !pending.is_empty() {
                out.push(finish_sentence(std::mem::take(&mut pending))?);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| CorpusError::MalformedLine {
            line: line_no,
            reason: format!("bad ID `{}`", cols[0]),
        })?;
        if id != pending.len() + 1 {
            return Err(CorpusError::MalformedLine {
                line: line_no,
                reason: format!("expected ID {}, found {id}", pending.len() + 1),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| CorpusError::MalformedLine {
            line: line_no,
            reason: format!("bad HEAD `{}`", cols[6]),
        })?;
        pending.push((line_no, id, head, cols[7].to_string()));
    }
    if !pending.is_empty() {
        out.push(finish_sentence(pending)?);
    }
    Ok(out)
}

pub fn read_conllu_deps<R: Read>(mut reader: R) -> Result<Vec<Vec<DepArc>>, CorpusError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_conllu_deps(&text)
}

fn finish_sentence(rows: Vec<(usize, usize, usize, String)>) -> Result<Vec<DepArc>, CorpusError> {
    let len = rows.len();
    rows.into_iter()
        .map(|(line, id, head, relation)| {
            if head > len || head == id {
                return Err(CorpusError::BadHeadIndex { line, head, len });
            }
            let head = if head == 0 { Head::Root } else { Head::Token(head - 1) };
            Ok(DepArc {
                dependent: id - 1,
                head,
                relation,
            })
        })
        .collect()
}
