//! Per-task cross-entropy losses and their mean over the tasks a batch
//! actually carries.

use crate::data::batch::Batch;
use crate::model::{time_major_targets, ForwardOutputs};
use crate::tape::{Tape, Var};

/// Loss nodes for the tasks present in one batch. A task absent from the
/// batch contributes no node at all.
#[derive(Debug, Clone, Copy)]
pub struct TaskLosses {
    pub pos: Option<Var>,
    pub chunk: Option<Var>,
    pub lm: Option<Var>,
}

impl TaskLosses {
    pub fn present(&self) -> impl Iterator<Item = Var> {
        [self.pos, self.chunk, self.lm].into_iter().flatten()
    }

    pub fn count(&self) -> usize {
        self.present().count()
    }
}

/// Mean cross-entropy per present task, each averaged over the positions
/// holding a target. The LM term is the mean of the next-word and
/// previous-word losses.
pub fn task_loss(tape: &mut Tape<f64>, outputs: &ForwardOutputs, batch: &Batch) -> TaskLosses {
    let (b, t) = (batch.b, batch.t);
    assert_eq!((b, t), (outputs.b, outputs.t), "outputs built from a different batch geometry");

    let pos = batch.pos_ids.as_ref().map(|grid| {
        let targets = time_major_targets(grid, b, t);
        tape.softmax_xent(outputs.pos_logits, targets)
    });
    let chunk = batch.chunk_ids.as_ref().map(|grid| {
        let targets = time_major_targets(grid, b, t);
        tape.softmax_xent(outputs.chunk_logits, targets)
    });
    let lm = batch.has_lm().then(|| {
        let next = time_major_targets(&batch.lm_next, b, t);
        let prev = time_major_targets(&batch.lm_prev, b, t);
        let fwd = tape.softmax_xent(outputs.lm_fwd_logits, next);
        let bwd = tape.softmax_xent(outputs.lm_bwd_logits, prev);
        let sum = tape.add(fwd, bwd);
        tape.scale(sum, 0.5)
    });
    TaskLosses { pos, chunk, lm }
}

/// Arithmetic mean over the present tasks' losses.
pub fn combined_loss(tape: &mut Tape<f64>, losses: &TaskLosses) -> Var {
    let present: Vec<Var> = losses.present().collect();
    assert!(!present.is_empty(), "batch carries no task to optimize");
    let mut acc = present[0];
    for &l in &present[1..] {
        acc = tape.add(acc, l);
    }
    if present.len() > 1 {
        acc = tape.scale(acc, 1.0 / present.len() as f64);
    }
    acc
}
