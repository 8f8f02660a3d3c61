//! Span-level precision, recall and F1.
//!
//! The relaxed score counts a predicted span as correct when it shares at
//! least one token with a gold span of the same type in the same sentence,
//! and a gold span as found when some predicted span of its type overlaps
//! it. Each span is counted once no matter how many partners it overlaps.
//! The strict score requires identical boundaries and type.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::{EntitySpan, EntityType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{gold} gold sentences but {pred} predicted sentences")]
    LengthMismatch { gold: usize, pred: usize },
}

/// Precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: &SpanCounts) -> Self {
        let p = percent(c.tp_pred, c.n_pred);
        let r = percent(c.tp_gold, c.n_gold);
        Prf {
            p,
            r,
            f1: harmonic(p, r),
        }
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub(crate) fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// `tp_pred` predicted spans matched out of `n_pred`; `tp_gold` gold spans
/// found out of `n_gold`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub tp_pred: usize,
    pub tp_gold: usize,
    pub n_pred: usize,
    pub n_gold: usize,
}

impl SpanCounts {
    fn add(&mut self, other: &SpanCounts) {
        self.tp_pred += other.tp_pred;
        self.tp_gold += other.tp_gold;
        self.n_pred += other.n_pred;
        self.n_gold += other.n_gold;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Prf,
    pub per_type: BTreeMap<EntityType, Prf>,
    pub counts: BTreeMap<EntityType, SpanCounts>,
}

impl EvalReport {
    /// Build a report from per-type counts; missing types count as zero.
    pub fn from_counts(mut counts: BTreeMap<EntityType, SpanCounts>) -> Self {
        let mut pooled = SpanCounts::default();
        for etype in EntityType::ALL {
            pooled.add(counts.entry(etype).or_default());
        }
        EvalReport {
            overall: Prf::from_counts(&pooled),
            per_type: counts.iter().map(|(&t, c)| (t, Prf::from_counts(c))).collect(),
            counts,
        }
    }

    pub fn pooled_counts(&self) -> SpanCounts {
        let mut pooled = SpanCounts::default();
        for c in self.counts.values() {
            pooled.add(c);
        }
        pooled
    }
}

#[derive(Clone, Copy)]
enum Matching {
    Overlap,
    Exact,
}

fn matches(a: &EntitySpan, b: &EntitySpan, how: Matching) -> bool {
    match how {
        Matching::Overlap => a.etype == b.etype && a.overlaps(b),
        Matching::Exact => a == b,
    }
}

fn score(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>], how: Matching) -> Result<EvalReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut counts: BTreeMap<EntityType, SpanCounts> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        for span in p {
            let c = counts.entry(span.etype).or_default();
            c.n_pred += 1;
            if g.iter().any(|other| matches(span, other, how)) {
                c.tp_pred += 1;
            }
        }
        for span in g {
            let c = counts.entry(span.etype).or_default();
            c.n_gold += 1;
            if p.iter().any(|other| matches(span, other, how)) {
                c.tp_gold += 1;
            }
        }
    }
    Ok(EvalReport::from_counts(counts))
}

/// Micro-averaged relaxed scores. `gold[i]` and `pred[i]` are the spans of
/// sentence `i`.
pub fn relaxed_prf(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> Result<EvalReport, MetricsError> {
    score(gold, pred, Matching::Overlap)
}

/// Micro-averaged exact-match scores.
pub fn strict_prf(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> Result<EvalReport, MetricsError> {
    score(gold, pred, Matching::Exact)
}

const HEADER: [&str; 4] = ["Entity type", "Precision", "Recall", "F1-score"];

fn row(out: &mut String, label: &str, prf: &Prf) {
    let _ = writeln!(out, "{:<12} {:>9.2} {:>9.2} {:>9.2}", label, prf.p, prf.r, prf.f1);
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>9} {:>9}",
        HEADER[0], HEADER[1], HEADER[2], HEADER[3]
    );
}

/// The per-type rows only, LOC, MISC, ORG, PER.
pub fn format_per_type(per_type: &BTreeMap<EntityType, Prf>) -> String {
    let mut out = String::new();
    header(&mut out);
    for etype in EntityType::ALL {
        row(
            &mut out,
            etype.as_str(),
            &per_type.get(&etype).copied().unwrap_or_default(),
        );
    }
    out
}

/// Fixed-width table with two decimals: one row per type, then overall.
pub fn format_report(r: &EvalReport) -> String {
    let mut out = format_per_type(&r.per_type);
    row(&mut out, "Overall", &r.overall);
    out
}

fn prf_value(prf: &Prf) -> Value {
    json!({ "p": prf.p, "r": prf.r, "f1": prf.f1 })
}

/// Machine-readable form: `overall.{p,r,f1}`, `per_type.<TYPE>.{p,r,f1}`
/// and `counts.<TYPE>`.
pub fn report_record(r: &EvalReport) -> Value {
    let mut per_type = serde_json::Map::new();
    let mut counts = serde_json::Map::new();
    for etype in EntityType::ALL {
        per_type.insert(
            etype.as_str().into(),
            prf_value(&r.per_type.get(&etype).copied().unwrap_or_default()),
        );
        let c = r.counts.get(&etype).copied().unwrap_or_default();
        counts.insert(etype.as_str().into(), serde_json::to_value(c).expect("plain struct"));
    }
    json!({
        "overall": prf_value(&r.overall),
        "per_type": per_type,
        "counts": counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use EntityType::*;

    fn sp(start: usize, end: usize, t: EntityType) -> EntitySpan {
        EntitySpan::new(start, end, t)
    }

    // Independent oracle: expand spans to token sets and compare every pair.
    fn oracle(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>], exact: bool) -> (usize, usize, usize, usize) {
        let hit = |a: &EntitySpan, b: &EntitySpan| {
            if exact {
                a.start == b.start && a.end == b.end && a.etype == b.etype
            } else {
                a.etype == b.etype && (a.start..=a.end).any(|t| (b.start..=b.end).contains(&t))
            }
        };
        let (mut tp_pred, mut tp_gold, mut n_pred, mut n_gold) = (0, 0, 0, 0);
        for (g, p) in gold.iter().zip(pred) {
            for a in p {
                n_pred += 1;
                let mut found = false;
                for b in g {
                    found |= hit(a, b);
                }
                tp_pred += found as usize;
            }
            for a in g {
                n_gold += 1;
                let mut found = false;
                for b in p {
                    found |= hit(a, b);
                }
                tp_gold += found as usize;
            }
        }
        (tp_pred, tp_gold, n_pred, n_gold)
    }

    #[test]
    fn partial_overlap_is_full_credit() {
        let r = relaxed_prf(&[vec![sp(3, 4, Loc)]], &[vec![sp(4, 4, Loc)]]).unwrap();
        assert_eq!(
            r.overall,
            Prf {
                p: 100.0,
                r: 100.0,
                f1: 100.0
            }
        );
        let s = strict_prf(&[vec![sp(3, 4, Loc)]], &[vec![sp(4, 4, Loc)]]).unwrap();
        assert_eq!(s.overall, Prf::default());
    }

    #[test]
    fn type_must_match() {
        let r = relaxed_prf(&[vec![sp(3, 4, Loc)]], &[vec![sp(3, 4, Per)]]).unwrap();
        assert_eq!(r.overall, Prf::default());
    }

    #[test]
    fn half_recall() {
        let r = relaxed_prf(&[vec![sp(0, 1, Per), sp(5, 5, Org)]], &[vec![sp(0, 0, Per)]]).unwrap();
        assert_eq!(r.overall.p, 100.0);
        assert_eq!(r.overall.r, 50.0);
        assert!((r.overall.f1 - 200.0 / 3.0).abs() < 1e-12);
        assert!(format_report(&r).contains("66.67"));
        assert_eq!(r.per_type[&Org].r, 0.0);
    }

    #[test]
    fn identical_sets_score_perfectly() {
        let spans = vec![vec![sp(0, 2, Misc), sp(4, 4, Per)], vec![], vec![sp(1, 1, Loc)]];
        for r in [
            relaxed_prf(&spans, &spans).unwrap(),
            strict_prf(&spans, &spans).unwrap(),
        ] {
            assert_eq!(
                r.overall,
                Prf {
                    p: 100.0,
                    r: 100.0,
                    f1: 100.0
                }
            );
        }
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            relaxed_prf(&[vec![]], &[]).unwrap_err(),
            MetricsError::LengthMismatch { gold: 1, pred: 0 }
        );
        assert!(strict_prf(&[], &[vec![]]).is_err());
    }

    #[test]
    fn empty_corpus_renders_zeros() {
        let r = relaxed_prf(&[], &[]).unwrap();
        let text = format_report(&r);
        assert_eq!(text.lines().count(), 6);
        for line in text.lines().skip(1) {
            assert!(line.ends_with("0.00      0.00      0.00"), "{line}");
        }
    }

    #[test]
    fn row_order_and_layout() {
        let r = relaxed_prf(&[vec![sp(0, 0, Per), sp(2, 2, Loc)]], &[vec![sp(0, 0, Per)]]).unwrap();
        let text = format_report(&r);
        let labels: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(labels, ["Entity", "LOC", "MISC", "ORG", "PER", "Overall"]);
        let widths: Vec<usize> = text.lines().map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]));
    }

    #[test]
    fn record_has_expected_keys() {
        let r = relaxed_prf(&[vec![sp(0, 0, Per)]], &[vec![sp(0, 0, Per)]]).unwrap();
        let v = report_record(&r);
        for k in ["p", "r", "f1"] {
            assert!(v["overall"][k].is_f64());
            for t in ["LOC", "MISC", "ORG", "PER"] {
                assert!(v["per_type"][t][k].is_f64());
            }
        }
        assert_eq!(v["counts"]["PER"]["n_gold"], 1);
        assert_eq!(v["per_type"]["PER"]["f1"], 100.0);
    }

    fn arb_sentence() -> impl Strategy<Value = Vec<EntitySpan>> {
        prop::collection::vec((0usize..12, 0usize..4, 0usize..4), 0..=3).prop_map(|raw| {
            raw.into_iter()
                .map(|(start, len, t)| sp(start, (start + len).min(11), EntityType::ALL[t]))
                .collect()
        })
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<Vec<EntitySpan>>, Vec<Vec<EntitySpan>>)> {
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(arb_sentence(), n),
                prop::collection::vec(arb_sentence(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn relaxed_matches_oracle((gold, pred) in arb_pair()) {
            let r = relaxed_prf(&gold, &pred).unwrap().pooled_counts();
            prop_assert_eq!((r.tp_pred, r.tp_gold, r.n_pred, r.n_gold), oracle(&gold, &pred, false));
            let s = strict_prf(&gold, &pred).unwrap().pooled_counts();
            prop_assert_eq!((s.tp_pred, s.tp_gold, s.n_pred, s.n_gold), oracle(&gold, &pred, true));
        }

        #[test]
        fn relaxed_dominates_strict((gold, pred) in arb_pair()) {
            let r = relaxed_prf(&gold, &pred).unwrap();
            let s = strict_prf(&gold, &pred).unwrap();
            prop_assert!(r.overall.p >= s.overall.p);
            prop_assert!(r.overall.r >= s.overall.r);
        }

        #[test]
        fn swapping_swaps_precision_and_recall((gold, pred) in arb_pair()) {
            for f in [relaxed_prf, strict_prf] {
                let a = f(&gold, &pred).unwrap();
                let b = f(&pred, &gold).unwrap();
                prop_assert_eq!(a.overall.p, b.overall.r);
                prop_assert_eq!(a.overall.r, b.overall.p);
            }
        }

        #[test]
        fn scores_are_percentages((gold, pred) in arb_pair()) {
            let r = relaxed_prf(&gold, &pred).unwrap();
            for prf in r.per_type.values().chain(std::iter::once(&r.overall)) {
                for v in [prf.p, prf.r, prf.f1] {
                    prop_assert!((0.0..=100.0).contains(&v));
                }
                prop_assert!((prf.f1 - harmonic(prf.p, prf.r)).abs() < 1e-12);
            }
        }
    }
}
