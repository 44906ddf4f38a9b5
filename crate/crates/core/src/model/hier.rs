//! The explicit task hierarchy: POS supervised on the shared layer,
//! chunking above it fed by the POS label mixture, and a bidirectional
//! language model at the most senior layer fed by the chunk mixture.
//! Skip connections concatenate the shared states into every senior input.

use crate::data::batch::Batch;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

use super::gru::{bigru_forward, BiGru};
use super::{time_major_mask, time_major_tokens, ForwardOutputs, ModelConfig};

#[derive(Debug, Clone, Copy)]
pub struct HierParams {
    pub config: ModelConfig,
    pub embed: ParamId,
    pub shared: BiGru,
    /// `[2d_h × n_pos]`
    pub pos_head: ParamId,
    /// `[n_pos × d_lab]`
    pub pos_labels: ParamId,
    pub chunk_rnn: BiGru,
    /// `[2d_h × n_chunk]`
    pub chunk_head: ParamId,
    /// `[n_chunk × d_lab]`
    pub chunk_labels: ParamId,
    pub lm_rnn: BiGru,
    /// `[d_h × V_lm]`
    pub lm_fwd_head: ParamId,
    /// `[d_h × V_lm]`
    pub lm_bwd_head: ParamId,
}

impl HierParams {
    /// Register every tensor of the hierarchy, zero-valued, under stable
    /// names. Each parameter enters the store exactly once.
    pub fn register(store: &mut ParamStore<f64>, config: ModelConfig) -> Self {
        config.validate();
        let c = &config;
        let senior_in = c.d_lab + 2 * c.d_h;
        HierParams {
            config,
            embed: store.add("embed", crate::Tensor::zeros(vec![c.vocab_size, c.d_w])),
            shared: BiGru::register(store, "shared", c.d_w, c.d_h),
            pos_head: store.add("pos_head", crate::Tensor::zeros(vec![2 * c.d_h, c.n_pos])),
            pos_labels: store.add("pos_labels", crate::Tensor::zeros(vec![c.n_pos, c.d_lab])),
            chunk_rnn: BiGru::register(store, "chunk", senior_in, c.d_h),
            chunk_head: store.add("chunk_head", crate::Tensor::zeros(vec![2 * c.d_h, c.n_chunk])),
            chunk_labels: store.add("chunk_labels", crate::Tensor::zeros(vec![c.n_chunk, c.d_lab])),
            lm_rnn: BiGru::register(store, "lm", senior_in, c.d_h),
            lm_fwd_head: store.add("lm_fwd_head", crate::Tensor::zeros(vec![c.d_h, c.lm_vocab_size])),
            lm_bwd_head: store.add("lm_bwd_head", crate::Tensor::zeros(vec![c.d_h, c.lm_vocab_size])),
        }
    }
}

/// Expected label embedding under a predicted distribution:
/// `distribution · table`, with rows of `distribution` over n labels and
/// `table` `[n × d_lab]`. Differentiable in both arguments, which is what
/// lets senior-task error reach junior heads.
pub fn label_mixture(tape: &mut Tape<f64>, distribution: Var, table: Var) -> Var {
    tape.matmul(distribution, table)
}

/// One forward pass of the hierarchy over a batch. Sequence outputs are
/// time-major; padded positions emit zeros from every recurrent layer.
pub fn hier_forward(
    tape: &mut Tape<f64>,
    store: &ParamStore<f64>,
    params: &HierParams,
    batch: &Batch,
) -> ForwardOutputs {
    let (b, t) = (batch.b, batch.t);
    let ids = time_major_tokens(batch);
    let mask = time_major_mask(batch);

    let embed = tape.param(store, params.embed);
    let x = tape.lookup(embed, &ids);
    let shared = bigru_forward(tape, store, &params.shared, x, &mask, b, t);
    let h = shared.concat;

    let pos_w = tape.param(store, params.pos_head);
    let pos_logits = tape.matmul(h, pos_w);
    let pos_dist = tape.softmax(pos_logits);
    let pos_table = tape.param(store, params.pos_labels);
    let pos_mix = label_mixture(tape, pos_dist, pos_table);

    let chunk_in = tape.concat(&[pos_mix, h], 1);
    let chunk_states = bigru_forward(tape, store, &params.chunk_rnn, chunk_in, &mask, b, t);
    let chunk_w = tape.param(store, params.chunk_head);
    let chunk_logits = tape.matmul(chunk_states.concat, chunk_w);
    let chunk_dist = tape.softmax(chunk_logits);
    let chunk_table = tape.param(store, params.chunk_labels);
    let chunk_mix = label_mixture(tape, chunk_dist, chunk_table);

    let lm_in = tape.concat(&[chunk_mix, h], 1);
    let lm_states = bigru_forward(tape, store, &params.lm_rnn, lm_in, &mask, b, t);
    let lm_fwd_w = tape.param(store, params.lm_fwd_head);
    let lm_bwd_w = tape.param(store, params.lm_bwd_head);
    // Directional split: forward states predict the next word, backward
    // states the previous word, so neither head can see its own target.
    let lm_fwd_logits = tape.matmul(lm_states.fwd, lm_fwd_w);
    let lm_bwd_logits = tape.matmul(lm_states.bwd, lm_bwd_w);

    ForwardOutputs {
        b,
        t,
        shared: h,
        pos_logits,
        pos_dist,
        chunk_logits,
        chunk_dist,
        lm_fwd_logits,
        lm_bwd_logits,
    }
}
