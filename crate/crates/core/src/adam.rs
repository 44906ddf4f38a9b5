//! ADAM optimizer with bias correction, applied in place to a [`ParamStore`].

use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::TensorData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one pair per parameter tensor,
/// in parameter-store order.
#[derive(Debug)]
pub struct Adam<S> {
    config: AdamConfig,
    m: Vec<TensorData<S>>,
    v: Vec<TensorData<S>>,
    step: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig, store: &ParamStore<S>) -> Self {
        let m = store.iter().map(|(_, e)| TensorData::zeros(e.value.shape().to_vec())).collect();
        let v = store.iter().map(|(_, e)| TensorData::zeros(e.value.shape().to_vec())).collect();
        Adam { config, m, v, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One update from the gradients currently held in `store`.
    pub fn step(&mut self, store: &mut ParamStore<S>) {
        assert_eq!(
            self.m.len(),
            store.len(),
            "optimizer tracks {} tensors but store has {}",
            self.m.len(),
            store.len()
        );
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::from_f64_lossy(self.config.beta1);
        let b2 = S::from_f64_lossy(self.config.beta2);
        let lr = S::from_f64_lossy(self.config.lr);
        let eps = S::from_f64_lossy(self.config.eps);
        let one = S::one();
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);

        for (i, id) in store.ids().into_iter().enumerate() {
            let grad = store.grad(id).data().to_vec();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let value = store.value_mut(id).data_mut();
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                value[j] = value[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
