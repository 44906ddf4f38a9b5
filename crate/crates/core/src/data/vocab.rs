//! Word vocabularies and task label sets.

use std::collections::HashMap;

use super::conll::Sentence;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercase and map every ASCII digit to '0'. Vocabulary and embedding
/// lookups see this form; original surface forms stay on the sentences.
pub fn normalize_word(word: &str) -> String {
    word.to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_digit() { '0' } else { c })
        .collect()
}

/// Dense word-id assignment with reserved PAD (0) and UNK (1) slots.
/// Real words occupy ids 2.. in order of (frequency desc, word asc), so
/// id order is also frequency order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, usize>,
    id_to_word: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Build from normalized-word counts. Exposed for deserialization;
    /// corpus callers use [`build_vocab`].
    pub fn from_sorted_words(words: Vec<(String, u64)>) -> Self {
        let mut id_to_word = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut counts = vec![0u64, 0u64];
        let mut word_to_id = HashMap::new();
        for (w, c) in words {
            assert!(
                !word_to_id.contains_key(&w) && w != PAD_TOKEN && w != UNK_TOKEN,
                "duplicate or reserved word {w:?}"
            );
            word_to_id.insert(w.clone(), id_to_word.len());
            id_to_word.push(w);
            counts.push(c);
        }
        Vocabulary { word_to_id, id_to_word, counts }
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of a raw word, normalizing first; unseen words map to UNK.
    pub fn id(&self, word: &str) -> usize {
        self.id_of_normalized(&normalize_word(word))
    }

    pub fn id_of_normalized(&self, word: &str) -> usize {
        self.word_to_id.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.id_to_word[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    /// Words with their counts in id order, excluding the reserved slots.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.id_to_word
            .iter()
            .zip(&self.counts)
            .skip(2)
            .map(|(w, &c)| (w.as_str(), c))
    }
}

/// Count normalized words across `corpora` and keep those with frequency
/// ≥ `min_frequency`. Id assignment is a pure function of the corpus
/// multiset: ties in count break lexicographically.
pub fn build_vocab(corpora: &[&[Sentence]], min_frequency: u64) -> Vocabulary {
    assert!(!corpora.is_empty(), "build_vocab needs at least one corpus");
    let mut counts: HashMap<String, u64> = HashMap::new();
    for corpus in corpora {
        for sentence in *corpus {
            for token in &sentence.tokens {
                *counts.entry(normalize_word(token)).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(String, u64)> =
        counts.into_iter().filter(|(_, c)| *c >= min_frequency.max(1)).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_sorted_words(kept)
}

/// Dense label-id mapping for one tagging task. No padding label lives in
/// the space; padded positions are excluded by masks instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    task: String,
    label_to_id: HashMap<String, usize>,
    id_to_label: Vec<String>,
}

impl LabelSet {
    /// Collect the distinct labels appearing in `labels`, sorted
    /// lexicographically for deterministic ids.
    pub fn from_labels<'a>(task: &str, labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut distinct: Vec<&str> = labels.into_iter().collect();
        distinct.sort_unstable();
        distinct.dedup();
        Self::from_ordered(task, distinct.into_iter().map(str::to_string).collect())
    }

    /// Build with ids following the given order. Exposed for deserialization.
    pub fn from_ordered(task: &str, id_to_label: Vec<String>) -> Self {
        let mut label_to_id = HashMap::new();
        for (i, l) in id_to_label.iter().enumerate() {
            let prev = label_to_id.insert(l.clone(), i);
            assert!(prev.is_none(), "duplicate label {l:?} in {task} label set");
        }
        LabelSet { task: task.to_string(), label_to_id, id_to_label }
    }

    pub fn task(&self) -> &str {
        &self.task
    }

    pub fn len(&self) -> usize {
        self.id_to_label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_label.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.label_to_id.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.id_to_label[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.id_to_label
    }
}
