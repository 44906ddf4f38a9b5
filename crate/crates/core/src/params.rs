//! Named trainable parameters with gradient buffers.

use std::collections::HashMap;

use crate::scalar::Scalar;
use crate::tensor::TensorData;

/// Index of a parameter in its [`ParamStore`]. Stable for the store's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct ParamEntry<S> {
    pub name: String,
    pub value: TensorData<S>,
    pub grad: TensorData<S>,
}

/// Flat collection of model parameters. Creation order is the canonical
/// iteration order everywhere (optimizer, checkpoints, gradient checks).
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    entries: Vec<ParamEntry<S>>,
    by_name: HashMap<String, ParamId>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore { entries: Vec::new(), by_name: HashMap::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: TensorData<S>) -> ParamId {
        let name = name.into();
        assert!(!self.by_name.contains_key(&name), "duplicate parameter name {name:?}");
        let id = ParamId(self.entries.len());
        let grad = TensorData::zeros(value.shape().to_vec());
        self.by_name.insert(name.clone(), id);
        self.entries.push(ParamEntry { name, value, grad });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &TensorData<S> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut TensorData<S> {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &TensorData<S> {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut TensorData<S> {
        &mut self.entries[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<S>)> {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// Zero every gradient buffer. Called before each backward pass.
    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(S::zero());
        }
    }

    /// Global L2 norm over all gradient buffers.
    pub fn grad_norm(&self) -> S {
        self.entries
            .iter()
            .fold(S::zero(), |acc, e| acc + e.grad.sq_norm())
            .sqrt()
    }

    /// Scale all gradients so the global norm does not exceed `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: S) {
        let norm = self.grad_norm();
        if norm > max_norm {
            let scale = max_norm / norm;
            for e in &mut self.entries {
                for g in e.grad.data_mut() {
                    *g = *g * scale;
                }
            }
        }
    }
}
