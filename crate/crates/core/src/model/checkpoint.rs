//! Binary checkpoints: versioned header, config echo, the vocabulary and
//! label sets needed to run the model later, then named parameter blocks
//! as raw 64-bit little-endian values. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::vocab::{LabelSet, Vocabulary};
use crate::params::ParamStore;
use crate::tensor::TensorData;

use super::baseline::BaselineParams;
use super::hier::HierParams;
use super::{ModelConfig, ModelKind};

const MAGIC: &[u8; 8] = b"HIERTAG\0";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

fn bad(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Format(msg.into())
}

/// Everything needed to rebuild a model: config, graph kind, vocabulary,
/// label sets, and parameter values.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub kind: ModelKind,
    pub vocab: Vocabulary,
    pub pos_labels: LabelSet,
    pub chunk_labels: LabelSet,
    pub store: ParamStore<f64>,
}

impl Checkpoint {
    /// Rebuild hierarchy handles over the stored parameters. The stored
    /// tensor names and shapes must match the registration exactly.
    pub fn into_hier(self) -> Result<(ParamStore<f64>, HierParams, Vocabulary, LabelSet, LabelSet), CheckpointError> {
        if self.kind != ModelKind::Hier {
            return Err(bad(format!("checkpoint holds a {} model", self.kind.as_str())));
        }
        let mut fresh = ParamStore::new();
        let params = HierParams::register(&mut fresh, self.config);
        copy_by_name(&self.store, &mut fresh)?;
        Ok((fresh, params, self.vocab, self.pos_labels, self.chunk_labels))
    }

    pub fn into_baseline(
        self,
    ) -> Result<(ParamStore<f64>, BaselineParams, Vocabulary, LabelSet, LabelSet), CheckpointError> {
        if self.kind != ModelKind::Baseline {
            return Err(bad(format!("checkpoint holds a {} model", self.kind.as_str())));
        }
        let mut fresh = ParamStore::new();
        let params = BaselineParams::register(&mut fresh, self.config);
        copy_by_name(&self.store, &mut fresh)?;
        Ok((fresh, params, self.vocab, self.pos_labels, self.chunk_labels))
    }

    /// Rebuild whichever graph the checkpoint holds.
    pub fn into_model(
        self,
    ) -> Result<(ParamStore<f64>, super::AnyModel, Vocabulary, LabelSet, LabelSet), CheckpointError>
    {
        match self.kind {
            ModelKind::Hier => {
                self.into_hier().map(|(s, p, v, pl, cl)| (s, super::AnyModel::Hier(p), v, pl, cl))
            }
            ModelKind::Baseline => self
                .into_baseline()
                .map(|(s, p, v, pl, cl)| (s, super::AnyModel::Baseline(p), v, pl, cl)),
        }
    }
}

fn copy_by_name(src: &ParamStore<f64>, dst: &mut ParamStore<f64>) -> Result<(), CheckpointError> {
    if src.len() != dst.len() {
        return Err(bad(format!(
            "checkpoint has {} tensors, model expects {}",
            src.len(),
            dst.len()
        )));
    }
    for id in dst.ids() {
        let name = dst.name(id).to_string();
        let s = src
            .id(&name)
            .ok_or_else(|| bad(format!("checkpoint missing tensor {name:?}")))?;
        if src.value(s).shape() != dst.value(id).shape() {
            return Err(bad(format!(
                "tensor {name:?} has shape {:?}, model expects {:?}",
                src.value(s).shape(),
                dst.value(id).shape()
            )));
        }
        dst.value_mut(id).data_mut().copy_from_slice(src.value(s).data());
    }
    Ok(())
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    write_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_usize<R: Read>(r: &mut R, what: &str, limit: u64) -> Result<usize, CheckpointError> {
    let v = read_u64(r)?;
    if v > limit {
        return Err(bad(format!("{what} {v} exceeds sane limit {limit}")));
    }
    Ok(v as usize)
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = read_usize(r, "string length", 1 << 20)?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| bad(format!("invalid utf-8 in checkpoint: {e}")))
}

/// Serialize a trained model with its data-side context.
pub fn save_checkpoint(
    path: &Path,
    config: &ModelConfig,
    kind: ModelKind,
    vocab: &Vocabulary,
    pos_labels: &LabelSet,
    chunk_labels: &LabelSet,
    store: &ParamStore<f64>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    for v in [
        config.vocab_size,
        config.d_w,
        config.d_h,
        config.d_lab,
        config.n_pos,
        config.n_chunk,
        config.lm_vocab_size,
    ] {
        write_u64(&mut w, v as u64)?;
    }
    w.write_all(&[match kind {
        ModelKind::Hier => 0u8,
        ModelKind::Baseline => 1u8,
    }])?;

    let entries: Vec<(&str, u64)> = vocab.entries().collect();
    write_u64(&mut w, entries.len() as u64)?;
    for (word, count) in entries {
        write_str(&mut w, word)?;
        write_u64(&mut w, count)?;
    }
    for labels in [pos_labels, chunk_labels] {
        write_str(&mut w, labels.task())?;
        write_u64(&mut w, labels.len() as u64)?;
        for l in labels.labels() {
            write_str(&mut w, l)?;
        }
    }

    write_u64(&mut w, store.len() as u64)?;
    for (_, e) in store.iter() {
        write_str(&mut w, &e.name)?;
        w.write_all(&[e.value.shape().len() as u8])?;
        for &d in e.value.shape() {
            write_u64(&mut w, d as u64)?;
        }
        for v in e.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a model checkpoint (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}, expected {VERSION}")));
    }
    let mut dims = [0usize; 7];
    for d in dims.iter_mut() {
        *d = read_usize(&mut r, "config extent", 1 << 32)?;
    }
    let config = ModelConfig {
        vocab_size: dims[0],
        d_w: dims[1],
        d_h: dims[2],
        d_lab: dims[3],
        n_pos: dims[4],
        n_chunk: dims[5],
        lm_vocab_size: dims[6],
    };
    config.validate();
    let mut kind_byte = [0u8; 1];
    r.read_exact(&mut kind_byte)?;
    let kind = match kind_byte[0] {
        0 => ModelKind::Hier,
        1 => ModelKind::Baseline,
        other => return Err(bad(format!("unknown model kind byte {other}"))),
    };

    let n_words = read_usize(&mut r, "vocabulary size", 1 << 32)?;
    let mut words = Vec::with_capacity(n_words);
    for _ in 0..n_words {
        let word = read_str(&mut r)?;
        let count = read_u64(&mut r)?;
        words.push((word, count));
    }
    let vocab = Vocabulary::from_sorted_words(words);
    if vocab.len() != config.vocab_size {
        return Err(bad(format!(
            "vocabulary holds {} words, config says {}",
            vocab.len(),
            config.vocab_size
        )));
    }

    let mut label_sets = Vec::with_capacity(2);
    for expected in [config.n_pos, config.n_chunk] {
        let task = read_str(&mut r)?;
        let n = read_usize(&mut r, "label count", 1 << 20)?;
        if n != expected {
            return Err(bad(format!("{task} label set holds {n} labels, config says {expected}")));
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(read_str(&mut r)?);
        }
        label_sets.push(LabelSet::from_ordered(&task, labels));
    }
    let chunk_labels = label_sets.pop().expect("two sets read");
    let pos_labels = label_sets.pop().expect("two sets read");

    let n_tensors = read_usize(&mut r, "tensor count", 1 << 20)?;
    let mut store = ParamStore::new();
    for _ in 0..n_tensors {
        let name = read_str(&mut r)?;
        let mut rank = [0u8; 1];
        r.read_exact(&mut rank)?;
        let mut shape = Vec::with_capacity(rank[0] as usize);
        for _ in 0..rank[0] {
            shape.push(read_usize(&mut r, "tensor extent", 1 << 32)?);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut buf = [0u8; 8];
        for _ in 0..numel {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        store.add(&name, TensorData::new(shape, data));
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after parameter blocks"));
    }

    Ok(Checkpoint { config, kind, vocab, pos_labels, chunk_labels, store })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::conll::Sentence;
    use crate::data::vocab::build_vocab;
    use crate::model::init::init_hier_params;

    fn fixture() -> (ModelConfig, Vocabulary, LabelSet, LabelSet) {
        let s = vec![Sentence::unlabeled(
            "the cat sat on the mat".split_whitespace().map(str::to_string).collect(),
        )];
        let vocab = build_vocab(&[&s], 1);
        let pos = LabelSet::from_labels("pos", ["DT", "NN", "VB", "IN"]);
        let chunk = LabelSet::from_labels("chunk", ["B-NP", "I-NP", "B-VP", "B-PP", "O"]);
        let config = ModelConfig::new(vocab.len(), 5, 4, 3, pos.len(), chunk.len(), 6);
        (config, vocab, pos, chunk)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (config, vocab, pos, chunk, dir) = {
            let (c, v, p, ch) = fixture();
            (c, v, p, ch, tempfile::tempdir().unwrap())
        };
        let (store, _) = init_hier_params(config, 17);
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, ModelKind::Hier, &vocab, &pos, &chunk, &store).unwrap();

        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config, config);
        assert_eq!(loaded.kind, ModelKind::Hier);
        assert_eq!(loaded.vocab, vocab);
        assert_eq!(loaded.pos_labels, pos);
        assert_eq!(loaded.chunk_labels, chunk);
        assert_eq!(loaded.store.len(), store.len());
        for (id, e) in store.iter() {
            let lid = loaded.store.id(&e.name).expect("name survives");
            assert_eq!(loaded.store.value(lid).shape(), e.value.shape());
            let a: Vec<u64> = e.value.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = loaded.store.value(lid).data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "bit-exact round trip for {}", store.name(id));
        }

        let (fresh, _, v2, p2, c2) = loaded.into_hier().unwrap();
        assert_eq!(v2, vocab);
        assert_eq!(p2, pos);
        assert_eq!(c2, chunk);
        for (_, e) in store.iter() {
            let fid = fresh.id(&e.name).unwrap();
            assert_eq!(fresh.value(fid).data(), e.value.data());
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"NOTAMODEL-----------").unwrap();
        match load_checkpoint(&path) {
            Err(CheckpointError::Format(m)) => assert!(m.contains("bad magic"), "{m}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let (config, vocab, pos, chunk) = fixture();
        let (store, _) = init_hier_params(config, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, ModelKind::Hier, &vocab, &pos, &chunk, &store).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99;
        std::fs::write(&path, bytes).unwrap();
        match load_checkpoint(&path) {
            Err(CheckpointError::Format(m)) => assert!(m.contains("version"), "{m}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let (config, vocab, pos, chunk) = fixture();
        let (store, _) = init_hier_params(config, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, ModelKind::Hier, &vocab, &pos, &chunk, &store).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn kind_mismatch_rejected_on_rebuild() {
        let (config, vocab, pos, chunk) = fixture();
        let (store, _) = init_hier_params(config, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, ModelKind::Hier, &vocab, &pos, &chunk, &store).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert!(loaded.into_baseline().is_err());
    }
}
