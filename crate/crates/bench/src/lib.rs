//! Fixtures shared by the criterion benches and the scaling test.

use std::sync::Arc;

use kvshare_core::{
    build_pool, gaussian_samples, synth_gaussian_dump, KvTensor, ModelGeometry, SharedPool,
    TensorShape,
};

/// One Llama-3-8B layer tensor at `seq_len` tokens.
pub fn layer_shape(seq_len: usize) -> TensorShape {
    ModelGeometry::llama3_8b(seq_len).tensor_shape()
}

pub fn gaussian_tensor(shape: TensorShape, seed: u64) -> KvTensor {
    let data = gaussian_samples(shape.num_elements(), seed)
        .into_iter()
        .map(|x| x as f32)
        .collect();
    KvTensor::new(shape, data).expect("finite gaussian data")
}

pub fn gaussian_vector(d: usize, seed: u64) -> Vec<f32> {
    gaussian_samples(d, seed)
        .into_iter()
        .map(|x| x as f32)
        .collect()
}

pub fn pool_fixture(geometry: &ModelGeometry, seed: u64) -> Arc<SharedPool> {
    let dump = synth_gaussian_dump(geometry, seed).expect("valid geometry");
    build_pool(&dump).expect("pool builds")
}
