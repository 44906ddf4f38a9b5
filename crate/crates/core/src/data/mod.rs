//! Corpus handling: CoNLL parsing, vocabularies, label sets, pretrained
//! embeddings, batching, and the synthetic grammar used by the test suite.

pub mod batch;
pub mod conll;
pub mod embeddings;
pub mod synthetic;
pub mod vocab;

pub use batch::{make_batches, Batch, BatchSpec};
pub use conll::{load_unlabeled, parse_conll, serialize_conll, ColumnSpec, Sentence};
pub use embeddings::{load_pretrained_embeddings, PretrainedEmbeddings};
pub use synthetic::gen_synthetic;
pub use vocab::{build_vocab, normalize_word, LabelSet, Vocabulary, PAD_ID, UNK_ID};

/// Errors surfaced while reading corpora and embedding files.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
