//! Seeded synthetic KV dumps with i.i.d. Gaussian coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;
use crate::tensor::{KvDump, KvLayer, KvTensor};

/// Gaussian dump with per-coordinate variance `1/head_dim`, the marginal a
/// uniformly rotated unit vector converges to.
pub fn synth_gaussian_dump(geometry: &ModelGeometry, seed: u64) -> Result<KvDump> {
    synth_gaussian_dump_with_variance(geometry, seed, 1.0 / geometry.head_dim as f64)
}

pub fn synth_gaussian_dump_with_variance(
    geometry: &ModelGeometry,
    seed: u64,
    variance: f64,
) -> Result<KvDump> {
    geometry.validate()?;
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance must be positive and finite, got {variance}"
        )));
    }
    let sd = variance.sqrt();
    let shape = geometry.tensor_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensor = |rng: &mut ChaCha8Rng| {
        let data = (0..shape.num_elements())
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (z * sd) as f32
            })
            .collect();
        KvTensor::from_trusted(shape, data)
    };
    let layers = (0..geometry.num_layers)
        .map(|_| {
            let k = tensor(&mut rng);
            let v = tensor(&mut rng);
            KvLayer { k, v }
        })
        .collect();
    KvDump::new(*geometry, layers)
}

/// `n` seeded standard normal draws, for codebook training.
pub fn gaussian_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
