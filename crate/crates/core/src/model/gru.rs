//! GRU cells and masked bidirectional layers.
//!
//! Sequence activations live on the tape in time-major layout: a `[T·B × d]`
//! matrix whose row `t·B + b` is position `t` of batch row `b`. Masked
//! (padding) steps propagate the previous hidden state unchanged and emit
//! zeros, so padding never perturbs real positions in either direction.

use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::TensorData;

/// Parameter ids for one GRU direction.
#[derive(Debug, Clone, Copy)]
pub struct GruDir {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruDir {
    /// Register the nine tensors of one direction under `prefix`.
    pub fn register(store: &mut ParamStore<f64>, prefix: &str, d_in: usize, d_h: usize) -> Self {
        let mat = |store: &mut ParamStore<f64>, name: String, r: usize, c: usize| {
            store.add(&name, TensorData::zeros(vec![r, c]))
        };
        let vec = |store: &mut ParamStore<f64>, name: String| {
            store.add(&name, TensorData::zeros(vec![d_h]))
        };
        GruDir {
            w_z: mat(store, format!("{prefix}.w_z"), d_in, d_h),
            u_z: mat(store, format!("{prefix}.u_z"), d_h, d_h),
            b_z: vec(store, format!("{prefix}.b_z")),
            w_r: mat(store, format!("{prefix}.w_r"), d_in, d_h),
            u_r: mat(store, format!("{prefix}.u_r"), d_h, d_h),
            b_r: vec(store, format!("{prefix}.b_r")),
            w_h: mat(store, format!("{prefix}.w_h"), d_in, d_h),
            u_h: mat(store, format!("{prefix}.u_h"), d_h, d_h),
            b_h: vec(store, format!("{prefix}.b_h")),
        }
    }
}

/// Tape nodes for one direction's parameters, fetched once per pass.
#[derive(Debug, Clone, Copy)]
pub struct GruDirVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

impl GruDirVars {
    pub fn load(tape: &mut Tape<f64>, store: &ParamStore<f64>, dir: &GruDir) -> Self {
        GruDirVars {
            w_z: tape.param(store, dir.w_z),
            u_z: tape.param(store, dir.u_z),
            b_z: tape.param(store, dir.b_z),
            w_r: tape.param(store, dir.w_r),
            u_r: tape.param(store, dir.u_r),
            b_r: tape.param(store, dir.b_r),
            w_h: tape.param(store, dir.w_h),
            u_h: tape.param(store, dir.u_h),
            b_h: tape.param(store, dir.b_h),
        }
    }
}

/// One GRU step over a row batch: `x` is `[n × d_in]`, `h_prev` is
/// `[n × d_h]`.
///
/// z = σ(W_z x + U_z h_prev + b_z)
/// r = σ(W_r x + U_r h_prev + b_r)
/// h̃ = tanh(W_h x + U_h (r ⊙ h_prev) + b_h)
/// h = (1 − z) ⊙ h_prev + z ⊙ h̃
pub fn gru_cell(tape: &mut Tape<f64>, x: Var, h_prev: Var, p: &GruDirVars) -> Var {
    let gate = |tape: &mut Tape<f64>, w: Var, u: Var, b: Var, hx: Var| {
        let xw = tape.matmul(x, w);
        let hu = tape.matmul(hx, u);
        let s = tape.add(xw, hu);
        tape.add_bias(s, b)
    };
    let z_pre = gate(tape, p.w_z, p.u_z, p.b_z, h_prev);
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_r, p.u_r, p.b_r, h_prev);
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev);
    let h_pre = gate(tape, p.w_h, p.u_h, p.b_h, rh);
    let h_cand = tape.tanh(h_pre);
    // (1 − z) ⊙ h_prev + z ⊙ h̃, written as h_prev + z ⊙ (h̃ − h_prev).
    let delta = tape.sub(h_cand, h_prev);
    let z_delta = tape.mul(z, delta);
    tape.add(h_prev, z_delta)
}

/// Ids for a bidirectional layer.
#[derive(Debug, Clone, Copy)]
pub struct BiGru {
    pub fwd: GruDir,
    pub bwd: GruDir,
    pub d_in: usize,
    pub d_h: usize,
}

impl BiGru {
    pub fn register(store: &mut ParamStore<f64>, prefix: &str, d_in: usize, d_h: usize) -> Self {
        BiGru {
            fwd: GruDir::register(store, &format!("{prefix}.fwd"), d_in, d_h),
            bwd: GruDir::register(store, &format!("{prefix}.bwd"), d_in, d_h),
            d_in,
            d_h,
        }
    }
}

/// Emitted per-direction states of a bidirectional pass, each `[T·B × d_h]`
/// in time-major order, plus their concatenation `[T·B × 2d_h]`.
#[derive(Debug, Clone, Copy)]
pub struct BiGruStates {
    pub concat: Var,
    pub fwd: Var,
    pub bwd: Var,
}

fn direction_pass(
    tape: &mut Tape<f64>,
    vars: &GruDirVars,
    x: Var,
    mask: &[f64],
    b: usize,
    t: usize,
    d_h: usize,
    reverse: bool,
) -> Var {
    let h0 = tape.constant(TensorData::zeros(vec![b, d_h]));
    let mut h = h0;
    let mut emitted: Vec<Option<Var>> = vec![None; t];
    let steps: Vec<usize> =
        if reverse { (0..t).rev().collect() } else { (0..t).collect() };
    for step in steps {
        let x_t = tape.slice_rows(x, step * b, b);
        let h_new = gru_cell(tape, x_t, h, vars);
        let col = &mask[step * b..(step + 1) * b];
        if col.iter().all(|&m| m == 1.0) {
            h = h_new;
            emitted[step] = Some(h);
        } else {
            // h = h_prev + m ⊙ (h_new − h_prev); emit m ⊙ h.
            let mut m_data = Vec::with_capacity(b * d_h);
            for &m in col {
                m_data.extend(std::iter::repeat_n(m, d_h));
            }
            let m = tape.constant(TensorData::new(vec![b, d_h], m_data));
            let delta = tape.sub(h_new, h);
            let m_delta = tape.mul(m, delta);
            h = tape.add(h, m_delta);
            emitted[step] = Some(tape.mul(m, h));
        }
    }
    let parts: Vec<Var> = emitted.into_iter().map(|e| e.expect("all steps emitted")).collect();
    if parts.len() == 1 {
        parts[0]
    } else {
        tape.concat(&parts, 0)
    }
}

/// Run both directions over a time-major input `x` `[T·B × d_in]` with a
/// time-major 0/1 `mask` of length `T·B`. Initial states are zero.
pub fn bigru_forward(
    tape: &mut Tape<f64>,
    store: &ParamStore<f64>,
    layer: &BiGru,
    x: Var,
    mask: &[f64],
    b: usize,
    t: usize,
) -> BiGruStates {
    assert_eq!(
        tape.value(x).shape(),
        &[t * b, layer.d_in],
        "bigru input shape {:?} does not match [{}x{}]",
        tape.value(x).shape(),
        t * b,
        layer.d_in
    );
    assert_eq!(mask.len(), t * b, "mask length {} does not match {}", mask.len(), t * b);
    assert!(mask.iter().all(|&m| m == 0.0 || m == 1.0), "mask must be 0/1");
    let fwd_vars = GruDirVars::load(tape, store, &layer.fwd);
    let bwd_vars = GruDirVars::load(tape, store, &layer.bwd);
    let fwd = direction_pass(tape, &fwd_vars, x, mask, b, t, layer.d_h, false);
    let bwd = direction_pass(tape, &bwd_vars, x, mask, b, t, layer.d_h, true);
    let concat = tape.concat(&[fwd, bwd], 1);
    BiGruStates { concat, fwd, bwd }
}
