//! Pretrained word-embedding files: "word v1 … vd" rows, constant arity.

use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::vocab::{normalize_word, Vocabulary};
use super::DataError;
use crate::tensor::TensorData;

#[derive(Debug)]
pub struct PretrainedEmbeddings {
    /// `[V × d]`; in-coverage rows copied from the file, the rest drawn
    /// from the same uniform scheme the model uses for fresh tables.
    pub table: TensorData<f64>,
    pub dim: usize,
    /// Count of non-reserved vocabulary words found in the file.
    pub found: usize,
    /// Non-reserved vocabulary size.
    pub considered: usize,
}

impl PretrainedEmbeddings {
    /// |vocab ∩ file| / |vocab non-reserved|.
    pub fn coverage(&self) -> f64 {
        if self.considered == 0 {
            0.0
        } else {
            self.found as f64 / self.considered as f64
        }
    }
}

/// Read an embedding file against `vocab`. File words are normalized the
/// same way vocabulary words are; when several file rows collapse to one
/// vocabulary word the first wins. Words absent from the vocabulary are
/// ignored. Rows must share one dimensionality.
pub fn load_pretrained_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    rng: &mut ChaCha8Rng,
) -> Result<PretrainedEmbeddings, DataError> {
    let mut dim: Option<usize> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut filled = vec![false; vocab.len()];

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-empty line has a first field");
        let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| DataError::Parse {
            line: line_no,
            message: format!("bad embedding value: {e}"),
        })?;
        match dim {
            None => {
                if values.is_empty() {
                    return Err(DataError::Parse {
                        line: line_no,
                        message: "embedding row has no values".to_string(),
                    });
                }
                dim = Some(values.len());
            }
            Some(d) if d != values.len() => {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("embedding dimension {} does not match {}", values.len(), d),
                });
            }
            _ => {}
        }
        let id = vocab.id_of_normalized(&normalize_word(word));
        if id >= 2 && !filled[id] {
            filled[id] = true;
            rows.push((id, values));
        }
    }

    let dim = dim.ok_or_else(|| DataError::Parse {
        line: 0,
        message: "embedding file contains no rows".to_string(),
    })?;

    let v = vocab.len();
    let bound = (6.0 / (v + dim) as f64).sqrt();
    let mut data = Vec::with_capacity(v * dim);
    for _ in 0..v * dim {
        data.push(rng.random_range(-bound..bound));
    }
    let mut table = TensorData::new(vec![v, dim], data);
    let found = rows.len();
    for (id, values) in rows {
        table.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(&values);
    }

    Ok(PretrainedEmbeddings { table, dim, found, considered: v - 2 })
}
