//! The two computation graphs: an explicit task hierarchy and a flat
//! multi-task baseline, both over the same embedding + Bi-GRU substrate.

pub mod baseline;
pub mod checkpoint;
pub mod gru;
pub mod hier;
pub mod init;

pub use baseline::{baseline_forward, BaselineParams};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gru::{bigru_forward, gru_cell, BiGru, BiGruStates, GruDir, GruDirVars};
pub use hier::{hier_forward, label_mixture, HierParams};
pub use init::{init_baseline_params, init_hier_params, init_store, overwrite_embeddings};

use crate::data::batch::Batch;
use crate::tape::{RowTargets, Tape, Var};

/// Extents shared by both graphs. `lm_vocab_size` is the LM softmax width,
/// already capped against the vocabulary size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_w: usize,
    pub d_h: usize,
    pub d_lab: usize,
    pub n_pos: usize,
    pub n_chunk: usize,
    pub lm_vocab_size: usize,
}

impl ModelConfig {
    pub fn new(
        vocab_size: usize,
        d_w: usize,
        d_h: usize,
        d_lab: usize,
        n_pos: usize,
        n_chunk: usize,
        lm_vocab_cap: usize,
    ) -> Self {
        let cfg = ModelConfig {
            vocab_size,
            d_w,
            d_h,
            d_lab,
            n_pos,
            n_chunk,
            lm_vocab_size: lm_vocab_cap.min(vocab_size),
        };
        cfg.validate();
        cfg
    }

    pub fn validate(&self) {
        assert!(self.vocab_size >= 2, "vocabulary must hold PAD and UNK");
        for (name, v) in [
            ("d_w", self.d_w),
            ("d_h", self.d_h),
            ("d_lab", self.d_lab),
            ("n_pos", self.n_pos),
            ("n_chunk", self.n_chunk),
        ] {
            assert!(v >= 1, "{name} must be at least 1");
        }
        assert!(
            self.lm_vocab_size >= 2 && self.lm_vocab_size <= self.vocab_size,
            "lm vocabulary {} out of range 2..={}",
            self.lm_vocab_size,
            self.vocab_size
        );
    }
}

/// Which graph a parameter set drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Hier,
    Baseline,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Hier => "eth",
            ModelKind::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "eth" | "hier" => Some(ModelKind::Hier),
            "baseline" => Some(ModelKind::Baseline),
            _ => None,
        }
    }
}

impl serde::Serialize for ModelKind {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ModelKind::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown architecture {s:?}")))
    }
}

/// Parameter handles for either graph, dispatching the forward pass.
#[derive(Debug, Clone, Copy)]
pub enum AnyModel {
    Hier(HierParams),
    Baseline(BaselineParams),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Hier(_) => ModelKind::Hier,
            AnyModel::Baseline(_) => ModelKind::Baseline,
        }
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            AnyModel::Hier(p) => p.config,
            AnyModel::Baseline(p) => p.config,
        }
    }

    pub fn embed(&self) -> crate::ParamId {
        match self {
            AnyModel::Hier(p) => p.embed,
            AnyModel::Baseline(p) => p.embed,
        }
    }

    pub fn pos_head(&self) -> crate::ParamId {
        match self {
            AnyModel::Hier(p) => p.pos_head,
            AnyModel::Baseline(p) => p.pos_head,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape<f64>,
        store: &crate::params::ParamStore<f64>,
        batch: &Batch,
    ) -> ForwardOutputs {
        match self {
            AnyModel::Hier(p) => hier_forward(tape, store, p, batch),
            AnyModel::Baseline(p) => baseline_forward(tape, store, p, batch),
        }
    }
}

/// Tape handles produced by one forward pass. Sequence nodes are
/// time-major `[T·B × ·]`: row `t·B + b` is position `t` of batch row `b`.
#[derive(Debug, Clone, Copy)]
pub struct ForwardOutputs {
    pub b: usize,
    pub t: usize,
    /// Shared hidden states `[T·B × 2d_h]`.
    pub shared: Var,
    pub pos_logits: Var,
    /// Row softmax of `pos_logits`.
    pub pos_dist: Var,
    pub chunk_logits: Var,
    pub chunk_dist: Var,
    /// Next-word logits `[T·B × V_lm]` from forward-direction states.
    pub lm_fwd_logits: Var,
    /// Previous-word logits from backward-direction states.
    pub lm_bwd_logits: Var,
}

impl ForwardOutputs {
    /// Next-word distribution, materialized on demand (the LM softmax is
    /// the widest tensor in the graph; training uses the fused loss on
    /// logits instead).
    pub fn lm_fwd_dist(&self, tape: &mut Tape<f64>) -> Var {
        tape.softmax(self.lm_fwd_logits)
    }

    pub fn lm_bwd_dist(&self, tape: &mut Tape<f64>) -> Var {
        tape.softmax(self.lm_bwd_logits)
    }
}

/// Token ids reordered time-major, padding as PAD.
pub fn time_major_tokens(batch: &Batch) -> Vec<usize> {
    let (b, t) = (batch.b, batch.t);
    let mut out = vec![0usize; t * b];
    for row in 0..b {
        for step in 0..t {
            out[step * b + row] = batch.tokens[row * t + step];
        }
    }
    out
}

/// Mask reordered time-major.
pub fn time_major_mask(batch: &Batch) -> Vec<f64> {
    let (b, t) = (batch.b, batch.t);
    let mut out = vec![0.0; t * b];
    for row in 0..b {
        for step in 0..t {
            out[step * b + row] = batch.mask[row * t + step];
        }
    }
    out
}

/// Reorder a batch-major `[b × t]` target grid into time-major row targets
/// aligned with sequence nodes.
pub fn time_major_targets(grid: &[Option<usize>], b: usize, t: usize) -> RowTargets {
    assert_eq!(grid.len(), b * t, "target grid length {} does not match {b}x{t}", grid.len());
    let mut out = vec![None; t * b];
    for row in 0..b {
        for step in 0..t {
            out[step * b + row] = grid[row * t + step];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::batch::{make_batches, BatchSpec};
    use crate::data::conll::Sentence;
    use crate::data::vocab::build_vocab;

    #[test]
    fn layout_round_trip() {
        let s = vec![
            Sentence::unlabeled(vec!["a".into(), "b".into(), "c".into()]),
            Sentence::unlabeled(vec!["d".into()]),
        ];
        let v = build_vocab(&[&s], 1);
        let batches = make_batches(&s, &v, None, None, &BatchSpec::new(4, 8, 100, 0));
        let batch = &batches[0];
        let toks = time_major_tokens(batch);
        let mask = time_major_mask(batch);
        assert_eq!(toks.len(), batch.b * batch.t);
        for row in 0..batch.b {
            for step in 0..batch.t {
                assert_eq!(toks[step * batch.b + row], batch.tokens[row * batch.t + step]);
                assert_eq!(mask[step * batch.b + row], batch.mask[row * batch.t + step]);
            }
        }
        let total_mask: f64 = mask.iter().sum();
        assert_eq!(total_mask, 4.0);
    }

    #[test]
    fn lm_cap_clamps_to_vocab() {
        let cfg = ModelConfig::new(50, 8, 8, 4, 5, 7, 10_000);
        assert_eq!(cfg.lm_vocab_size, 50);
        let cfg = ModelConfig::new(50, 8, 8, 4, 5, 7, 30);
        assert_eq!(cfg.lm_vocab_size, 30);
    }

    #[test]
    #[should_panic(expected = "d_h must be at least 1")]
    fn zero_dim_rejected() {
        ModelConfig::new(10, 4, 0, 4, 5, 7, 10);
    }
}
