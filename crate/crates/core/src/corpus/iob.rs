use log::warn;

use super::{EntitySpan, Scheme, SpanError, Tag};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedSpans {
    pub spans: Vec<EntitySpan>,
    /// IOB2 inputs only: number of `I-X` labels that had no same-type
    /// predecessor and were read as span starts.
    pub repairs: usize,
}

/// Decode maximal same-type runs into spans.
///
/// A span starts at every `B-X`, and at every `I-X` whose predecessor is
/// `O` or of another type. Under IOB1 that is the definition; under IOB2
/// it is a repair, logged and counted.
pub fn decode_spans(tags: &[Tag], scheme: Scheme) -> DecodedSpans {
    let mut spans: Vec<EntitySpan> = Vec::new();
    let mut repairs = 0;
    let mut open: Option<EntitySpan> = None;

    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::O => {
                spans.extend(open.take());
            }
            Tag::B(t) => {
                spans.extend(open.take());
                open = Some(EntitySpan::new(i, i, t));
            }
            Tag::I(t) => match open.as_mut() {
                Some(span) if span.etype == t => span.end = i,
                _ => {
                    spans.extend(open.take());
                    if scheme == Scheme::Iob2 {
                        repairs += 1;
                    }
                    open = Some(EntitySpan::new(i, i, t));
                }
            },
        }
    }
    spans.extend(open);
    if repairs > 0 {
        warn!("repaired {repairs} I- label(s) without a span start");
    }
    DecodedSpans { spans, repairs }
}

pub fn iob_to_spans(tags: &[Tag], scheme: Scheme) -> Vec<EntitySpan> {
    decode_spans(tags, scheme).spans
}

/// Encode spans as labels. Spans may come in any order but must be in
/// range and pairwise disjoint.
pub fn spans_to_iob(spans: &[EntitySpan], len: usize, scheme: Scheme) -> Result<Vec<Tag>, SpanError> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for span in &sorted {
        if span.start > span.end || span.end >= len {
            return Err(SpanError::OutOfRange { span: *span, len });
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(SpanError::Overlap {
                first: pair[0],
                second: pair[1],
            });
        }
    }

    let mut tags = vec![Tag::O; len];
    let mut prev: Option<EntitySpan> = None;
    for span in &sorted {
        for tag in &mut tags[span.start..=span.end] {
            *tag = Tag::I(span.etype);
        }
        let touches_same_type = prev.is_some_and(|p| p.end + 1 == span.start && p.etype == span.etype);
        if scheme == Scheme::Iob2 || touches_same_type {
            tags[span.start] = Tag::B(span.etype);
        }
        prev = Some(*span);
    }
    Ok(tags)
}

/// Re-encode a label sequence as IOB2.
pub fn to_iob2(tags: &[Tag], scheme: Scheme) -> Vec<Tag> {
    let spans = iob_to_spans(tags, scheme);
    spans_to_iob(&spans, tags.len(), Scheme::Iob2).expect("decoded spans are disjoint and in range")
}
