//! Numerical gradient verification against central finite differences.
//!
//! The caller runs one analytic forward/backward pass (so the store's
//! gradients are populated), then hands the store and a pure loss closure
//! to [`gradient_check`]. The checker perturbs sampled parameter entries,
//! re-evaluates the loss, and compares slopes.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::params::ParamStore;
use crate::scalar::Scalar;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Entries sampled per tensor; small tensors are checked exhaustively.
pub const MAX_ENTRIES_PER_TENSOR: usize = 64;

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "{:<24} checked {:>3} entries, max rel err {:.3e} (analytic {:+.6e}, numeric {:+.6e} at [{}])",
                p.name, p.checked, p.max_rel_err, p.worst_analytic, p.worst_numeric, p.worst_index
            )?;
        }
        write!(f, "overall max rel err {:.3e}", self.max_rel_err)
    }
}

/// Relative error with an absolute floor of 1, so tiny gradients are judged
/// on absolute error and large ones on relative error.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Compare the analytic gradients stored in `store` against central
/// differences of `loss_fn`, sampling up to [`MAX_ENTRIES_PER_TENSOR`]
/// entries per tensor. The sample is deterministic in `seed`. `loss_fn`
/// must be a pure function of the parameter values.
pub fn gradient_check<S, F>(store: &mut ParamStore<S>, mut loss_fn: F, seed: u64) -> GradCheckReport
where
    S: Scalar,
    F: FnMut(&ParamStore<S>) -> S,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    let mut overall: f64 = 0.0;
    let h = FD_STEP;

    for id in store.ids() {
        let numel = store.value(id).numel();
        let indices: Vec<usize> = if numel <= MAX_ENTRIES_PER_TENSOR {
            (0..numel).collect()
        } else {
            rand::seq::index::sample(&mut rng, numel, MAX_ENTRIES_PER_TENSOR).into_vec()
        };

        let mut check = ParamCheck {
            name: store.name(id).to_string(),
            checked: indices.len(),
            max_rel_err: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };

        for i in indices {
            let analytic = store.grad(id).data()[i].to_f64_lossy();
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + S::from_f64_lossy(h);
            let up = loss_fn(store).to_f64_lossy();
            store.value_mut(id).data_mut()[i] = orig - S::from_f64_lossy(h);
            let down = loss_fn(store).to_f64_lossy();
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = rel_err(analytic, numeric);
            if err > check.max_rel_err {
                check.max_rel_err = err;
                check.worst_index = i;
                check.worst_analytic = analytic;
                check.worst_numeric = numeric;
            }
        }

        overall = overall.max(check.max_rel_err);
        params.push(check);
    }

    GradCheckReport { params, max_rel_err: overall }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;
    use crate::tensor::TensorData;

    #[test]
    fn correct_gradients_pass() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.add("w", TensorData::new(vec![3], vec![0.2, -1.3, 0.7]));
        let loss_fn = |s: &ParamStore<f64>| {
            let mut tape = Tape::new();
            let wv = tape.param(s, w);
            let sg = tape.sigmoid(wv);
            let t = tape.tanh(sg);
            let l = tape.sum(t);
            tape.scalar_value(l)
        };

        store.zero_grads();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let sg = tape.sigmoid(wv);
        let t = tape.tanh(sg);
        let l = tape.sum(t);
        tape.backward(l, &mut store);

        let report = gradient_check(&mut store, loss_fn, 123);
        assert!(report.passes(1e-6), "{report}");
    }

    #[test]
    fn corrupted_gradients_fail() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.add("w", TensorData::new(vec![2], vec![0.5, -0.5]));
        store.zero_grads();
        // Deliberately wrong analytic gradient for loss = sum(w).
        store.grad_mut(w).data_mut().copy_from_slice(&[3.0, 3.0]);
        let report = gradient_check(
            &mut store,
            |s: &ParamStore<f64>| s.value(w).data().iter().sum::<f64>(),
            9,
        );
        assert!(!report.passes(1e-4));
        assert!(report.max_rel_err > 0.5);
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let n = 500;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let w = store.add("big", TensorData::new(vec![n], vals));
        store.zero_grads();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let t = tape.tanh(wv);
        let l = tape.sum(t);
        tape.backward(l, &mut store);

        let f = |s: &ParamStore<f64>| {
            s.value(w).data().iter().map(|x| x.tanh()).sum::<f64>()
        };
        let r1 = gradient_check(&mut store, f, 77);
        let r2 = gradient_check(&mut store, f, 77);
        assert_eq!(r1.params[0].checked, MAX_ENTRIES_PER_TENSOR);
        assert_eq!(r1.params[0].worst_index, r2.params[0].worst_index);
        assert_eq!(r1.max_rel_err, r2.max_rel_err);
        assert!(r1.passes(1e-6));
    }

    #[test]
    fn rel_err_uses_unit_floor() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert!((rel_err(1e-9, 2e-9) - 1e-9).abs() < 1e-15);
        assert!((rel_err(200.0, 100.0) - 0.5).abs() < 1e-12);
    }
}
