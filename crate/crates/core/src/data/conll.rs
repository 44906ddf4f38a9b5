//! CoNLL-style column files and raw unlabeled text.

use std::io::BufRead;

use super::DataError;

/// One sentence, optionally carrying per-token tag sequences. Tags are
/// all-or-none per sentence: either every token has one or the field is
/// absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub pos_tags: Option<Vec<String>>,
    pub chunk_tags: Option<Vec<String>>,
}

impl Sentence {
    pub fn new(
        tokens: Vec<String>,
        pos_tags: Option<Vec<String>>,
        chunk_tags: Option<Vec<String>>,
    ) -> Self {
        if let Some(p) = &pos_tags {
            assert_eq!(p.len(), tokens.len(), "pos tag count {} != token count {}", p.len(), tokens.len());
        }
        if let Some(c) = &chunk_tags {
            assert_eq!(c.len(), tokens.len(), "chunk tag count {} != token count {}", c.len(), tokens.len());
        }
        Sentence { tokens, pos_tags, chunk_tags }
    }

    pub fn unlabeled(tokens: Vec<String>) -> Self {
        Sentence { tokens, pos_tags: None, chunk_tags: None }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Maps whitespace-separated columns to roles. `columns` is the exact
/// expected column count per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpec {
    pub columns: usize,
    pub token: usize,
    pub pos: Option<usize>,
    pub chunk: Option<usize>,
}

impl ColumnSpec {
    /// token / POS / chunk, the CoNLL chunking layout.
    pub fn token_pos_chunk() -> Self {
        ColumnSpec { columns: 3, token: 0, pos: Some(1), chunk: Some(2) }
    }

    pub fn token_pos() -> Self {
        ColumnSpec { columns: 2, token: 0, pos: Some(1), chunk: None }
    }

    pub fn token_only() -> Self {
        ColumnSpec { columns: 1, token: 0, pos: None, chunk: None }
    }

    fn validate(&self) {
        assert!(self.columns >= 1, "column spec needs at least one column");
        assert!(self.token < self.columns, "token column {} out of {}", self.token, self.columns);
        if let Some(p) = self.pos {
            assert!(p < self.columns, "pos column {p} out of {}", self.columns);
        }
        if let Some(c) = self.chunk {
            assert!(c < self.columns, "chunk column {c} out of {}", self.columns);
        }
    }
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self::token_pos_chunk()
    }
}

fn chunk_tag_well_formed(tag: &str) -> bool {
    if tag == "O" {
        return true;
    }
    match tag.split_once('-') {
        Some((prefix, ty)) => (prefix == "B" || prefix == "I") && !ty.is_empty(),
        None => false,
    }
}

/// Parse a CoNLL-style stream: whitespace-separated columns, one token per
/// row, blank line ends a sentence. Tag sequences are validated, not
/// repaired; malformed rows report their 1-based line number.
pub fn parse_conll<R: BufRead>(reader: R, spec: &ColumnSpec) -> Result<Vec<Sentence>, DataError> {
    spec.validate();
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut pos: Vec<String> = Vec::new();
    let mut chunk: Vec<String> = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, pos: &mut Vec<String>, chunk: &mut Vec<String>| {
        if tokens.is_empty() {
            return;
        }
        let s = Sentence::new(
            std::mem::take(tokens),
            spec.pos.map(|_| std::mem::take(pos)),
            spec.chunk.map(|_| std::mem::take(chunk)),
        );
        sentences.push(s);
    };

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            flush(&mut tokens, &mut pos, &mut chunk);
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != spec.columns {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("expected {} columns, found {}", spec.columns, cols.len()),
            });
        }
        tokens.push(cols[spec.token].to_string());
        if let Some(p) = spec.pos {
            pos.push(cols[p].to_string());
        }
        if let Some(c) = spec.chunk {
            let tag = cols[c];
            if !chunk_tag_well_formed(tag) {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("malformed chunk tag {tag:?} (expected O, B-<type>, or I-<type>)"),
                });
            }
            chunk.push(tag.to_string());
        }
    }
    flush(&mut tokens, &mut pos, &mut chunk);
    Ok(sentences)
}

/// Inverse of [`parse_conll`] under the same column spec.
pub fn serialize_conll(sentences: &[Sentence], spec: &ColumnSpec) -> String {
    spec.validate();
    let mut out = String::new();
    for s in sentences {
        for i in 0..s.len() {
            let mut cols = vec![""; spec.columns];
            cols[spec.token] = &s.tokens[i];
            if let Some(p) = spec.pos {
                cols[p] = s.pos_tags.as_ref().expect("spec expects pos tags")[i].as_str();
            }
            if let Some(c) = spec.chunk {
                cols[c] = s.chunk_tags.as_ref().expect("spec expects chunk tags")[i].as_str();
            }
            out.push_str(&cols.join(" "));
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Raw unlabeled text: one pre-tokenized sentence per line, empty lines
/// skipped.
pub fn load_unlabeled<R: BufRead>(reader: R) -> Result<Vec<Sentence>, DataError> {
    let mut sentences = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            sentences.push(Sentence::unlabeled(tokens));
        }
    }
    Ok(sentences)
}
