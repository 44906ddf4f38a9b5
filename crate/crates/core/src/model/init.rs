//! Parameter initialization.
//!
//! Matrices draw from Uniform(−s, s) with s = sqrt(6 / (fan_in + fan_out));
//! biases start at zero except each update-gate bias b_z, which starts at
//! +1 so early training does not stall on closed gates.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::params::{ParamId, ParamStore};
use crate::tensor::TensorData;

use super::baseline::BaselineParams;
use super::hier::HierParams;
use super::ModelConfig;

/// Fill every registered tensor in place. Deterministic: values are a pure
/// function of (registration order, shapes, seed).
pub fn init_store(store: &mut ParamStore<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in store.ids() {
        let name = store.name(id).to_string();
        let shape = store.value(id).shape().to_vec();
        let data = store.value_mut(id).data_mut();
        match shape.len() {
            2 => {
                let s = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                for v in data.iter_mut() {
                    *v = rng.random_range(-s..s);
                }
            }
            1 => {
                let fill = if name.ends_with(".b_z") { 1.0 } else { 0.0 };
                for v in data.iter_mut() {
                    *v = fill;
                }
            }
            other => panic!("unexpected parameter rank {other} for {name}"),
        }
    }
}

/// Fresh hierarchy parameters.
pub fn init_hier_params(config: ModelConfig, seed: u64) -> (ParamStore<f64>, HierParams) {
    let mut store = ParamStore::new();
    let params = HierParams::register(&mut store, config);
    init_store(&mut store, seed);
    (store, params)
}

/// Fresh baseline parameters.
pub fn init_baseline_params(config: ModelConfig, seed: u64) -> (ParamStore<f64>, BaselineParams) {
    let mut store = ParamStore::new();
    let params = BaselineParams::register(&mut store, config);
    init_store(&mut store, seed);
    (store, params)
}

/// Replace the word-embedding table with pretrained rows.
pub fn overwrite_embeddings(store: &mut ParamStore<f64>, embed: ParamId, table: &TensorData<f64>) {
    let dst = store.value_mut(embed);
    assert_eq!(
        dst.shape(),
        table.shape(),
        "pretrained table shape {:?} does not match embedding shape {:?}",
        table.shape(),
        dst.shape()
    );
    dst.data_mut().copy_from_slice(table.data());
}
