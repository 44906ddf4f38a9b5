//! Padded mini-batches over id-mapped sentences.
//!
//! Rows are stored batch-major: row `r` of a `[b × t]` matrix occupies
//! `r*t .. (r+1)*t`. Sentences longer than the time budget are split into
//! consecutive segments rather than truncated, and language-model targets
//! never cross a segment boundary.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conll::Sentence;
use super::vocab::{LabelSet, Vocabulary, PAD_ID, UNK_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    /// Maximum rows per batch.
    pub b: usize,
    /// Maximum tokens per row; longer sentences split into segments.
    pub t: usize,
    /// Language-model target ids at or above this collapse to UNK.
    pub lm_vocab_size: usize,
    pub seed: u64,
}

impl BatchSpec {
    pub fn new(b: usize, t: usize, lm_vocab_size: usize, seed: u64) -> Self {
        assert!(b >= 1 && t >= 1, "batch geometry must be at least 1x1, got {b}x{t}");
        assert!(lm_vocab_size > UNK_ID, "lm vocabulary must include the UNK id");
        BatchSpec { b, t, lm_vocab_size, seed }
    }
}

/// One padded batch. `pos_ids`/`chunk_ids` are `Some` when the batch
/// carries that task's labels (per-batch presence); inside, `None` marks
/// padded positions. LM targets are per-position `None` when invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub b: usize,
    pub t: usize,
    pub tokens: Vec<usize>,
    pub mask: Vec<f64>,
    pub pos_ids: Option<Vec<Option<usize>>>,
    pub chunk_ids: Option<Vec<Option<usize>>>,
    pub lm_next: Vec<Option<usize>>,
    pub lm_prev: Vec<Option<usize>>,
    /// Per row: source sentence index and token offset of the segment start.
    pub origin: Vec<(usize, usize)>,
}

impl Batch {
    pub fn has_pos(&self) -> bool {
        self.pos_ids.is_some()
    }

    pub fn has_chunk(&self) -> bool {
        self.chunk_ids.is_some()
    }

    /// Whether any position has a language-model target. False only for
    /// degenerate batches made entirely of one-token segments.
    pub fn has_lm(&self) -> bool {
        self.lm_next.iter().any(Option::is_some) || self.lm_prev.iter().any(Option::is_some)
    }

    /// Count of real (unmasked) token positions.
    pub fn real_tokens(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1.0).count()
    }
}

fn cap_lm_target(id: usize, lm_vocab_size: usize) -> usize {
    if id < lm_vocab_size {
        id
    } else {
        UNK_ID
    }
}

/// Map sentences to id space, shuffle by seed, split into ≤`spec.t`
/// segments, and group segments into batches of ≤`spec.b` rows. Each
/// batch's time extent is trimmed to its longest segment.
///
/// All sentences must agree on which tag sequences they carry, and a label
/// set must be supplied for every task present.
pub fn make_batches(
    sentences: &[Sentence],
    vocab: &Vocabulary,
    pos_labels: Option<&LabelSet>,
    chunk_labels: Option<&LabelSet>,
    spec: &BatchSpec,
) -> Vec<Batch> {
    if sentences.is_empty() {
        return Vec::new();
    }
    let has_pos = sentences[0].pos_tags.is_some();
    let has_chunk = sentences[0].chunk_tags.is_some();
    for (i, s) in sentences.iter().enumerate() {
        assert!(!s.is_empty(), "sentence {i} is empty");
        assert_eq!(
            s.pos_tags.is_some(),
            has_pos,
            "sentence {i} disagrees on pos-tag presence; batch one corpus at a time"
        );
        assert_eq!(
            s.chunk_tags.is_some(),
            has_chunk,
            "sentence {i} disagrees on chunk-tag presence; batch one corpus at a time"
        );
    }
    if has_pos {
        assert!(pos_labels.is_some(), "sentences carry pos tags but no pos label set was supplied");
    }
    if has_chunk {
        assert!(chunk_labels.is_some(), "sentences carry chunk tags but no chunk label set was supplied");
    }

    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    // (sentence index, segment start, segment length)
    let mut segments: Vec<(usize, usize, usize)> = Vec::new();
    for &si in &order {
        let n = sentences[si].len();
        let mut start = 0;
        while start < n {
            let len = (n - start).min(spec.t);
            segments.push((si, start, len));
            start += len;
        }
    }

    let label_id = |set: &LabelSet, tag: &str| -> usize {
        set.id(tag).unwrap_or_else(|| panic!("label {tag:?} missing from {} label set", set.task()))
    };

    let mut batches = Vec::new();
    for group in segments.chunks(spec.b) {
        let b = group.len();
        let t = group.iter().map(|&(_, _, len)| len).max().expect("non-empty group");
        let mut batch = Batch {
            b,
            t,
            tokens: vec![PAD_ID; b * t],
            mask: vec![0.0; b * t],
            pos_ids: if has_pos { Some(vec![None; b * t]) } else { None },
            chunk_ids: if has_chunk { Some(vec![None; b * t]) } else { None },
            lm_next: vec![None; b * t],
            lm_prev: vec![None; b * t],
            origin: group.iter().map(|&(si, start, _)| (si, start)).collect(),
        };
        for (r, &(si, start, len)) in group.iter().enumerate() {
            let s = &sentences[si];
            for i in 0..len {
                let cell = r * t + i;
                let id = vocab.id(&s.tokens[start + i]);
                batch.tokens[cell] = id;
                batch.mask[cell] = 1.0;
                if let (Some(ids), Some(set)) = (batch.pos_ids.as_mut(), pos_labels) {
                    ids[cell] = Some(label_id(set, &s.pos_tags.as_ref().expect("has_pos")[start + i]));
                }
                if let (Some(ids), Some(set)) = (batch.chunk_ids.as_mut(), chunk_labels) {
                    ids[cell] =
                        Some(label_id(set, &s.chunk_tags.as_ref().expect("has_chunk")[start + i]));
                }
                if i + 1 < len {
                    let next = vocab.id(&s.tokens[start + i + 1]);
                    batch.lm_next[cell] = Some(cap_lm_target(next, spec.lm_vocab_size));
                }
                if i >= 1 {
                    let prev = vocab.id(&s.tokens[start + i - 1]);
                    batch.lm_prev[cell] = Some(cap_lm_target(prev, spec.lm_vocab_size));
                }
            }
        }
        batches.push(batch);
    }
    batches
}
