//! Flat multi-task baseline: one shared Bi-GRU, three independent heads.
//! The only shared parameters sit in the hidden layer; no task's
//! prediction feeds another task's input.

use crate::data::batch::Batch;
use crate::params::{ParamId, ParamStore};
use crate::tape::Tape;

use super::gru::{bigru_forward, BiGru};
use super::{time_major_mask, time_major_tokens, ForwardOutputs, ModelConfig};

#[derive(Debug, Clone, Copy)]
pub struct BaselineParams {
    pub config: ModelConfig,
    pub embed: ParamId,
    pub shared: BiGru,
    /// `[2d_h × n_pos]`
    pub pos_head: ParamId,
    /// `[2d_h × n_chunk]`
    pub chunk_head: ParamId,
    /// `[d_h × V_lm]`, reads the forward half of the shared states.
    pub lm_fwd_head: ParamId,
    /// `[d_h × V_lm]`, reads the backward half.
    pub lm_bwd_head: ParamId,
}

impl BaselineParams {
    /// Head and substrate names match the hierarchy's where the shapes
    /// agree, so weight-sharing comparisons can copy by name.
    pub fn register(store: &mut ParamStore<f64>, config: ModelConfig) -> Self {
        config.validate();
        let c = &config;
        BaselineParams {
            config,
            embed: store.add("embed", crate::Tensor::zeros(vec![c.vocab_size, c.d_w])),
            shared: BiGru::register(store, "shared", c.d_w, c.d_h),
            pos_head: store.add("pos_head", crate::Tensor::zeros(vec![2 * c.d_h, c.n_pos])),
            chunk_head: store.add("chunk_head", crate::Tensor::zeros(vec![2 * c.d_h, c.n_chunk])),
            lm_fwd_head: store.add("lm_fwd_head", crate::Tensor::zeros(vec![c.d_h, c.lm_vocab_size])),
            lm_bwd_head: store.add("lm_bwd_head", crate::Tensor::zeros(vec![c.d_h, c.lm_vocab_size])),
        }
    }
}

/// One forward pass of the baseline. Same output geometry as the
/// hierarchy; the LM heads read the shared layer's directional halves so
/// neither sees its own target token.
pub fn baseline_forward(
    tape: &mut Tape<f64>,
    store: &ParamStore<f64>,
    params: &BaselineParams,
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

    let chunk_w = tape.param(store, params.chunk_head);
    let chunk_logits = tape.matmul(h, chunk_w);
    let chunk_dist = tape.softmax(chunk_logits);

    let lm_fwd_w = tape.param(store, params.lm_fwd_head);
    let lm_bwd_w = tape.param(store, params.lm_bwd_head);
    let lm_fwd_logits = tape.matmul(shared.fwd, lm_fwd_w);
    let lm_bwd_logits = tape.matmul(shared.bwd, lm_bwd_w);

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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::batch::{make_batches, BatchSpec};
    use crate::data::conll::Sentence;
    use crate::data::vocab::{build_vocab, LabelSet, Vocabulary};
    use crate::model::hier::{hier_forward, HierParams};
    use crate::model::init::init_store;
    use crate::model::time_major_targets;

    fn toy() -> (Vocabulary, Batch) {
        let sentences = vec![
            Sentence::new(
                vec!["the".into(), "cat".into(), "sat".into()],
                Some(vec!["DT".into(), "NN".into(), "VB".into()]),
                Some(vec!["B-NP".into(), "I-NP".into(), "B-VP".into()]),
            ),
            Sentence::new(
                vec!["dogs".into(), "bark".into()],
                Some(vec!["NNS".into(), "VB".into()]),
                Some(vec!["B-NP".into(), "B-VP".into()]),
            ),
        ];
        let vocab = build_vocab(&[&sentences[..]], 1);
        let pos = LabelSet::from_labels("pos", ["DT", "NN", "VB", "NNS"]);
        let chunk = LabelSet::from_labels("chunk", ["B-NP", "I-NP", "B-VP"]);
        let batch = make_batches(
            &sentences,
            &vocab,
            Some(&pos),
            Some(&chunk),
            &BatchSpec::new(4, 8, 50, 3),
        )
        .remove(0);
        (vocab, batch)
    }

    fn config(v: usize) -> ModelConfig {
        ModelConfig::new(v, 6, 5, 3, 4, 3, 50)
    }

    #[test]
    fn shapes_match_hier_geometry() {
        let (vocab, batch) = toy();
        let cfg = config(vocab.len());
        let mut store = ParamStore::new();
        let params = BaselineParams::register(&mut store, cfg);
        init_store(&mut store, 1);
        let mut tape = Tape::new();
        let out = baseline_forward(&mut tape, &store, &params, &batch);
        let n = batch.b * batch.t;
        assert_eq!(tape.value(out.pos_dist).shape(), &[n, cfg.n_pos]);
        assert_eq!(tape.value(out.chunk_dist).shape(), &[n, cfg.n_chunk]);
        assert_eq!(tape.value(out.lm_fwd_logits).shape(), &[n, cfg.lm_vocab_size]);
        assert_eq!(tape.value(out.shared).shape(), &[n, 2 * cfg.d_h]);
    }

    #[test]
    fn lm_loss_alone_leaves_pos_head_untouched() {
        let (vocab, batch) = toy();
        let cfg = config(vocab.len());
        let mut store = ParamStore::new();
        let params = BaselineParams::register(&mut store, cfg);
        init_store(&mut store, 2);
        store.zero_grads();

        let mut tape = Tape::new();
        let out = baseline_forward(&mut tape, &store, &params, &batch);
        let next = time_major_targets(&batch.lm_next, batch.b, batch.t);
        let prev = time_major_targets(&batch.lm_prev, batch.b, batch.t);
        let lf = tape.softmax_xent(out.lm_fwd_logits, next);
        let lb = tape.softmax_xent(out.lm_bwd_logits, prev);
        let half = tape.add(lf, lb);
        let loss = tape.scale(half, 0.5);
        tape.backward(loss, &mut store);

        assert_eq!(store.grad(params.pos_head).sq_norm(), 0.0, "no path exists to the POS head");
        assert_eq!(store.grad(params.chunk_head).sq_norm(), 0.0);
        assert!(store.grad(params.lm_fwd_head).sq_norm() > 0.0);
        assert!(store.grad(params.embed).sq_norm() > 0.0, "shared substrate still learns");
    }

    #[test]
    fn pos_path_equals_hier_when_shared_weights_match() {
        let (vocab, batch) = toy();
        let cfg = config(vocab.len());

        let mut hier_store = ParamStore::new();
        let hier = HierParams::register(&mut hier_store, cfg);
        init_store(&mut hier_store, 9);

        let mut base_store = ParamStore::new();
        let base = BaselineParams::register(&mut base_store, cfg);
        init_store(&mut base_store, 10);

        // Copy the POS-relevant tensors by name: embedding, shared Bi-GRU,
        // POS head. Everything senior differs and must not matter.
        for id in base_store.ids() {
            let name = base_store.name(id).to_string();
            if name == "embed" || name == "pos_head" || name.starts_with("shared.") {
                let src = hier_store.id(&name).expect("hier has the same tensor");
                let values = hier_store.value(src).data().to_vec();
                base_store.value_mut(id).data_mut().copy_from_slice(&values);
            }
        }

        let mut tape_h = Tape::new();
        let out_h = hier_forward(&mut tape_h, &hier_store, &hier, &batch);
        let mut tape_b = Tape::new();
        let out_b = baseline_forward(&mut tape_b, &base_store, &base, &batch);

        assert_eq!(
            tape_h.value(out_h.pos_dist).data(),
            tape_b.value(out_b.pos_dist).data(),
            "POS sits below the hierarchy in both graphs"
        );
    }
}
