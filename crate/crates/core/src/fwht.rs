//! Fast Walsh-Hadamard transform along `head_dim`.
//!
//! `fwht_inplace` is the unnormalized transform H (entries +-1), which
//! satisfies H·H = d·I. The rotation pair scales by 1/sqrt(d) on both sides,
//! so `rotate_forward` is orthonormal and `rotate_inverse` is its exact
//! inverse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A transform length d = 2^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HadamardOrder(usize);

impl HadamardOrder {
    pub fn new(d: usize) -> Result<Self> {
        if d.is_power_of_two() {
            Ok(Self(d))
        } else {
            Err(Error::NotPowerOfTwo(d))
        }
    }

    pub fn size(self) -> usize {
        self.0
    }

    pub fn log2(self) -> u32 {
        self.0.trailing_zeros()
    }

    /// 1/sqrt(d), the per-side normalization of the orthonormal rotation.
    pub fn norm_factor(self) -> f32 {
        (1.0 / (self.0 as f64).sqrt()) as f32
    }
}

/// Unnormalized in-place transform. Iterative radix-2 butterflies,
/// O(d log d) additions.
pub fn fwht_inplace(vec: &mut [f32]) -> Result<()> {
    HadamardOrder::new(vec.len())?;
    butterflies(vec);
    Ok(())
}

#[inline]
pub(crate) fn butterflies(vec: &mut [f32]) {
    let n = vec.len();
    let mut h = 1;
    while h < n {
        for block in vec.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let x = *a;
                let y = *b;
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Returns FWHT(vec)/sqrt(d).
pub fn rotate_forward(vec: &[f32]) -> Result<Vec<f32>> {
    let mut out = vec.to_vec();
    rotate_forward_inplace(&mut out)?;
    Ok(out)
}

/// Inverse of [`rotate_forward`]: FWHT(vec)/sqrt(d). Together with the
/// forward 1/sqrt(d) this is the unnormalized inverse followed by 1/d.
pub fn rotate_inverse(vec: &[f32]) -> Result<Vec<f32>> {
    let mut out = vec.to_vec();
    rotate_inverse_inplace(&mut out)?;
    Ok(out)
}

pub fn rotate_forward_inplace(vec: &mut [f32]) -> Result<()> {
    let order = HadamardOrder::new(vec.len())?;
    butterflies(vec);
    scale(vec, order.norm_factor());
    Ok(())
}

pub fn rotate_inverse_inplace(vec: &mut [f32]) -> Result<()> {
    // H/sqrt(d) is symmetric and orthogonal, hence its own inverse.
    rotate_forward_inplace(vec)
}

#[inline]
fn scale(vec: &mut [f32], factor: f32) {
    for v in vec {
        *v *= factor;
    }
}

/// Seeded random +-1 diagonal applied before the forward rotation and after
/// the inverse. Off by default in the value quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDiagonal {
    seed: u64,
    signs: Vec<f32>,
}

impl SignDiagonal {
    pub fn new(order: HadamardOrder, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signs = (0..order.size())
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self { seed, signs }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signs(&self) -> &[f32] {
        &self.signs
    }

    /// Multiplies element-wise by the diagonal. The diagonal squares to I,
    /// so this is both the forward and the inverse application.
    pub fn apply(&self, vec: &mut [f32]) {
        debug_assert_eq!(vec.len(), self.signs.len());
        for (v, s) in vec.iter_mut().zip(&self.signs) {
            *v *= s;
        }
    }
}
