//! Deterministic synthetic corpus for desk-scale experiments.
//!
//! A template grammar emits sentences whose POS tags follow from word
//! class and whose chunk tags follow from the template, so POS is
//! genuinely predictive of chunking. An ambiguous word pool appears in
//! both noun and verb slots, which keeps token-level majority guessing
//! below perfect chunk F1. Word choice is Zipf-like, so small labeled
//! subsamples miss tail words that a larger unlabeled sample still covers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conll::Sentence;

struct ZipfClass {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl ZipfClass {
    fn new(words: Vec<String>, exponent: f64) -> Self {
        let mut cumulative = Vec::with_capacity(words.len());
        let mut total = 0.0;
        for i in 0..words.len() {
            total += 1.0 / ((i + 1) as f64).powf(exponent);
            cumulative.push(total);
        }
        ZipfClass { words, cumulative }
    }

    fn weighted(pairs: &[(&str, f64)]) -> Self {
        let mut cumulative = Vec::with_capacity(pairs.len());
        let mut total = 0.0;
        for &(_, w) in pairs {
            total += w;
            cumulative.push(total);
        }
        ZipfClass { words: pairs.iter().map(|&(w, _)| w.to_string()).collect(), cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> &str {
        let total = *self.cumulative.last().expect("non-empty class");
        let x = rng.random_range(0.0..total);
        let idx = self.cumulative.partition_point(|&c| c <= x);
        &self.words[idx.min(self.words.len() - 1)]
    }
}

struct Grammar {
    determiners: ZipfClass,
    adjectives: ZipfClass,
    nouns: ZipfClass,
    verbs: ZipfClass,
    prepositions: ZipfClass,
    adverbs: ZipfClass,
    /// Words legal in both noun and verb slots; POS depends on the slot.
    ambiguous: ZipfClass,
}

impl Grammar {
    fn new() -> Self {
        let series = |prefix: &str, n: usize| -> Vec<String> {
            (0..n).map(|i| format!("{prefix}{i:03}")).collect()
        };
        Grammar {
            determiners: ZipfClass::weighted(&[
                ("the", 10.0),
                ("a", 5.0),
                ("this", 2.0),
                ("these", 2.0),
                ("some", 1.0),
            ]),
            adjectives: ZipfClass::new(series("adj", 30), 1.1),
            nouns: ZipfClass::new(series("nn", 150), 1.2),
            verbs: ZipfClass::new(series("vb", 90), 1.2),
            prepositions: ZipfClass::weighted(&[
                ("in", 8.0),
                ("on", 5.0),
                ("with", 4.0),
                ("under", 2.0),
                ("near", 1.0),
            ]),
            adverbs: ZipfClass::new(series("adv", 20), 1.1),
            ambiguous: ZipfClass::new(series("amb", 40), 1.1),
        }
    }
}

struct Emitter<'g> {
    grammar: &'g Grammar,
    tokens: Vec<String>,
    pos: Vec<String>,
    chunks: Vec<String>,
}

impl<'g> Emitter<'g> {
    fn push(&mut self, token: &str, pos: &str, chunk: &str) {
        self.tokens.push(token.to_string());
        self.pos.push(pos.to_string());
        self.chunks.push(chunk.to_string());
    }

    fn noun_phrase(&mut self, rng: &mut ChaCha8Rng) {
        let g = self.grammar;
        self.push(g.determiners.sample(rng), "DT", "B-NP");
        if rng.random_bool(0.08) {
            let number = rng.random_range(1..100).to_string();
            self.push(&number, "CD", "I-NP");
        }
        let n_adj = match rng.random_range(0.0..1.0) {
            x if x < 0.6 => 0,
            x if x < 0.9 => 1,
            _ => 2,
        };
        for _ in 0..n_adj {
            self.push(g.adjectives.sample(rng), "JJ", "I-NP");
        }
        let ambiguous = rng.random_bool(0.25);
        let head =
            if ambiguous { g.ambiguous.sample(rng) } else { g.nouns.sample(rng) }.to_string();
        if !ambiguous && rng.random_bool(0.3) {
            self.push(&format!("{head}s"), "NNS", "I-NP");
        } else {
            self.push(&head, "NN", "I-NP");
        }
    }

    fn verb_phrase(&mut self, rng: &mut ChaCha8Rng) {
        let g = self.grammar;
        let mut chunk = "B-VP";
        if rng.random_bool(0.15) {
            self.push(g.adverbs.sample(rng), "RB", "B-VP");
            chunk = "I-VP";
        }
        let ambiguous = rng.random_bool(0.25);
        let head =
            if ambiguous { g.ambiguous.sample(rng) } else { g.verbs.sample(rng) }.to_string();
        if !ambiguous && rng.random_bool(0.5) {
            self.push(&format!("{head}d"), "VBD", chunk);
        } else {
            self.push(&head, "VB", chunk);
        }
    }

    fn prep_phrase(&mut self, rng: &mut ChaCha8Rng) {
        self.push(self.grammar.prepositions.sample(rng), "IN", "B-PP");
        self.noun_phrase(rng);
    }

    fn adverb_phrase(&mut self, rng: &mut ChaCha8Rng) {
        self.push(self.grammar.adverbs.sample(rng), "RB", "B-ADVP");
    }

    fn sentence(mut self, rng: &mut ChaCha8Rng) -> Sentence {
        match rng.random_range(0..100) {
            0..=24 => {
                self.noun_phrase(rng);
                self.verb_phrase(rng);
                self.noun_phrase(rng);
            }
            25..=44 => {
                self.noun_phrase(rng);
                self.verb_phrase(rng);
                self.noun_phrase(rng);
                self.prep_phrase(rng);
            }
            45..=59 => {
                self.noun_phrase(rng);
                self.adverb_phrase(rng);
                self.verb_phrase(rng);
                self.noun_phrase(rng);
            }
            60..=74 => {
                self.noun_phrase(rng);
                self.verb_phrase(rng);
                self.prep_phrase(rng);
            }
            75..=84 => {
                self.noun_phrase(rng);
                self.verb_phrase(rng);
            }
            85..=92 => {
                self.noun_phrase(rng);
                self.verb_phrase(rng);
                self.noun_phrase(rng);
                self.adverb_phrase(rng);
            }
            _ => {
                self.noun_phrase(rng);
                self.prep_phrase(rng);
                self.verb_phrase(rng);
                self.noun_phrase(rng);
            }
        }
        self.push(".", ".", "O");
        Sentence::new(self.tokens, Some(self.pos), Some(self.chunks))
    }
}

fn draw_sentence(grammar: &Grammar, rng: &mut ChaCha8Rng) -> Sentence {
    Emitter { grammar, tokens: Vec::new(), pos: Vec::new(), chunks: Vec::new() }.sentence(rng)
}

/// Generate `n` labeled sentences plus `10 n` unlabeled ones from one
/// seeded stream. Same seed, same corpora, byte for byte.
pub fn gen_synthetic(seed: u64, n: usize) -> (Vec<Sentence>, Vec<Sentence>) {
    assert!(n >= 1, "need at least one sentence");
    let grammar = Grammar::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labeled: Vec<Sentence> = (0..n).map(|_| draw_sentence(&grammar, &mut rng)).collect();
    let unlabeled: Vec<Sentence> = (0..10 * n)
        .map(|_| {
            let s = draw_sentence(&grammar, &mut rng);
            Sentence::unlabeled(s.tokens)
        })
        .collect();
    (labeled, unlabeled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn fixed_seed_reproduces_corpora() {
        let (l1, u1) = gen_synthetic(42, 50);
        let (l2, u2) = gen_synthetic(42, 50);
        assert_eq!(l1, l2);
        assert_eq!(u1, u2);
        let (l3, _) = gen_synthetic(43, 50);
        assert_ne!(l1, l3);
    }

    #[test]
    fn corpus_sizes_and_label_presence() {
        let (labeled, unlabeled) = gen_synthetic(7, 20);
        assert_eq!(labeled.len(), 20);
        assert_eq!(unlabeled.len(), 200);
        for s in &labeled {
            assert!(s.pos_tags.is_some() && s.chunk_tags.is_some());
            assert!(s.len() >= 3);
            assert_eq!(s.tokens.last().unwrap(), ".");
        }
        for s in &unlabeled {
            assert!(s.pos_tags.is_none() && s.chunk_tags.is_none());
        }
    }

    #[test]
    fn chunk_sequences_are_valid_bio() {
        let (labeled, _) = gen_synthetic(3, 500);
        for s in &labeled {
            let tags = s.chunk_tags.as_ref().unwrap();
            let mut prev_type: Option<&str> = None;
            for tag in tags {
                if let Some(ty) = tag.strip_prefix("I-") {
                    assert_eq!(
                        prev_type,
                        Some(ty),
                        "I-{ty} not continuing a {ty} chunk in {:?}",
                        tags
                    );
                }
                prev_type = tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-"));
            }
        }
    }

    #[test]
    fn ambiguous_words_take_both_roles() {
        let (labeled, _) = gen_synthetic(11, 2000);
        let mut noun_use: HashSet<&str> = HashSet::new();
        let mut verb_use: HashSet<&str> = HashSet::new();
        for s in &labeled {
            let pos = s.pos_tags.as_ref().unwrap();
            for (tok, p) in s.tokens.iter().zip(pos) {
                if tok.starts_with("amb") {
                    match p.as_str() {
                        "NN" => noun_use.insert(tok),
                        "VB" => verb_use.insert(tok),
                        other => panic!("ambiguous word tagged {other}"),
                    };
                }
            }
        }
        let both: Vec<&&str> = noun_use.intersection(&verb_use).collect();
        assert!(
            both.len() >= 10,
            "expected many words used as both noun and verb, got {}",
            both.len()
        );
    }

    #[test]
    fn token_level_majority_vote_is_imperfect_on_chunks() {
        // Upper-bounds any per-token memorizer: even with oracle majority
        // tags from the whole corpus, ambiguous words force errors.
        let (labeled, _) = gen_synthetic(5, 1000);
        let mut votes: HashMap<(&str, &str), usize> = HashMap::new();
        for s in &labeled {
            let tags = s.chunk_tags.as_ref().unwrap();
            for (tok, tag) in s.tokens.iter().zip(tags) {
                *votes.entry((tok.as_str(), tag.as_str())).or_insert(0) += 1;
            }
        }
        let mut majority: HashMap<&str, (&str, usize)> = HashMap::new();
        for (&(tok, tag), &c) in &votes {
            let e = majority.entry(tok).or_insert((tag, 0));
            if c > e.1 {
                *e = (tag, c);
            }
        }
        let mut errors = 0usize;
        let mut total = 0usize;
        for s in &labeled {
            let tags = s.chunk_tags.as_ref().unwrap();
            for (tok, tag) in s.tokens.iter().zip(tags) {
                total += 1;
                if majority[tok.as_str()].0 != tag.as_str() {
                    errors += 1;
                }
            }
        }
        assert!(errors > 0, "majority vote should not be perfect");
        assert!(total > 0);
    }

    #[test]
    fn pos_determines_chunk_role_for_ambiguous_words() {
        let (labeled, _) = gen_synthetic(13, 500);
        for s in &labeled {
            let pos = s.pos_tags.as_ref().unwrap();
            let chunks = s.chunk_tags.as_ref().unwrap();
            for i in 0..s.len() {
                if s.tokens[i].starts_with("amb") {
                    match pos[i].as_str() {
                        "NN" => assert_eq!(chunks[i], "I-NP"),
                        "VB" => assert!(chunks[i] == "B-VP" || chunks[i] == "I-VP"),
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    #[test]
    fn small_subsample_misses_words_the_big_sample_has() {
        let (labeled, unlabeled) = gen_synthetic(17, 2000);
        let vocab_of = |ss: &[Sentence]| -> HashSet<String> {
            ss.iter().flat_map(|s| s.tokens.iter().cloned()).collect()
        };
        let small = vocab_of(&labeled[..200]);
        let full = vocab_of(&unlabeled);
        let missing = full.difference(&small).count();
        assert!(
            missing > 30,
            "expected the 10% subsample to miss tail words, missing only {missing}"
        );
    }
}
