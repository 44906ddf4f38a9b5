//! POS accuracy and chunk F1 over BIO spans, following conlleval
//! semantics: spans may start leniently at an I- tag with no live chunk of
//! that type, and credit requires an exact (start, end, type) match.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

/// (start, end exclusive, chunk type). Non-overlapping within a sentence
/// by construction of the extractor.
pub type SpanSet = BTreeSet<(usize, usize, String)>;

/// Extract chunk spans from a BIO tag sequence. A span starts at `B-X`,
/// or at `I-X` when no `X` chunk is open (lenient start); it ends before
/// `O`, before any `B-`, before an `I-` of another type, or at the end of
/// the sequence.
pub fn extract_spans<S: AsRef<str>>(tags: &[S]) -> SpanSet {
    let mut spans = SpanSet::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (prefix, ty) = match tag.split_once('-') {
            Some((p, t)) if p == "B" || p == "I" => (p, t),
            _ => ("O", ""),
        };
        match (prefix, &open) {
            ("I", Some((_, open_ty))) if *open_ty == ty => {}
            ("I", _) | ("B", _) => {
                if let Some((start, open_ty)) = open.take() {
                    spans.insert((start, i, open_ty.to_string()));
                }
                open = Some((i, ty));
            }
            _ => {
                if let Some((start, open_ty)) = open.take() {
                    spans.insert((start, i, open_ty.to_string()));
                }
            }
        }
    }
    if let Some((start, ty)) = open {
        spans.insert((start, tags.len(), ty.to_string()));
    }
    spans
}

/// Exact-match counts with derived precision/recall/F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Micro-averaged chunk scores with a per-type breakdown.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ChunkScores {
    pub overall: MatchCounts,
    pub per_type: BTreeMap<String, MatchCounts>,
}

/// Score predicted spans against gold, sentence-aligned. A prediction is a
/// true positive iff the identical triple exists in that sentence's gold.
pub fn chunk_f1(gold: &[SpanSet], pred: &[SpanSet]) -> ChunkScores {
    assert_eq!(
        gold.len(),
        pred.len(),
        "gold has {} sentences, predictions have {}",
        gold.len(),
        pred.len()
    );
    let mut scores = ChunkScores::default();
    for (g, p) in gold.iter().zip(pred) {
        for span in p {
            let e = scores.per_type.entry(span.2.clone()).or_default();
            if g.contains(span) {
                scores.overall.tp += 1;
                e.tp += 1;
            } else {
                scores.overall.fp += 1;
                e.fp += 1;
            }
        }
        for span in g {
            if !p.contains(span) {
                scores.overall.fn_ += 1;
                scores.per_type.entry(span.2.clone()).or_default().fn_ += 1;
            }
        }
    }
    scores
}

/// Fraction of masked-in positions where prediction equals gold.
pub fn pos_accuracy<T: PartialEq>(gold: &[T], pred: &[T], mask: &[bool]) -> f64 {
    assert_eq!(gold.len(), pred.len(), "gold length {} != pred length {}", gold.len(), pred.len());
    assert_eq!(gold.len(), mask.len(), "mask length {} != tag length {}", mask.len(), gold.len());
    let mut correct = 0usize;
    let mut total = 0usize;
    for i in 0..gold.len() {
        if mask[i] {
            total += 1;
            if gold[i] == pred[i] {
                correct += 1;
            }
        }
    }
    assert!(total > 0, "no masked-in positions to score");
    correct as f64 / total as f64
}

/// Full evaluation summary for one model on one corpus.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub pos_accuracy: f64,
    pub chunk_precision: f64,
    pub chunk_recall: f64,
    pub chunk_f1: f64,
    pub per_type: BTreeMap<String, MatchCounts>,
    pub sentences: usize,
    pub tokens: usize,
}

impl EvalReport {
    pub fn new(pos_accuracy: f64, chunk: &ChunkScores, sentences: usize, tokens: usize) -> Self {
        EvalReport {
            pos_accuracy,
            chunk_precision: chunk.overall.precision(),
            chunk_recall: chunk.overall.recall(),
            chunk_f1: chunk.overall.f1(),
            per_type: chunk.per_type.clone(),
            sentences,
            tokens,
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences: {}  tokens: {}", self.sentences, self.tokens)?;
        writeln!(f, "pos accuracy: {:.2}%", 100.0 * self.pos_accuracy)?;
        writeln!(
            f,
            "chunk: precision {:.2}%  recall {:.2}%  F1 {:.2}%",
            100.0 * self.chunk_precision,
            100.0 * self.chunk_recall,
            100.0 * self.chunk_f1
        )?;
        for (ty, c) in &self.per_type {
            writeln!(
                f,
                "  {:<8} P {:.2}%  R {:.2}%  F1 {:.2}%  (tp {} fp {} fn {})",
                ty,
                100.0 * c.precision(),
                100.0 * c.recall(),
                100.0 * c.f1(),
                c.tp,
                c.fp,
                c.fn_
            )?;
        }
        Ok(())
    }
}
