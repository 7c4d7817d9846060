//! Asymmetric quantizers: q8_0 for keys, rotated 3-bit Lloyd-Max for values.

pub mod codebook;
pub mod key;
pub mod lloyd;
pub mod pack;
pub mod value;

pub use codebook::{
    nearest_centroid, Codebook, CodebookId, DistortionBound, GAUSSIAN_3BIT_CENTROIDS,
};
pub use key::{dequantize_k, dequantize_k_into, quantize_k, QuantizedKeyBlock, KEY_BITS};
pub use lloyd::{lloyd_max_train, LloydMaxOutcome};
pub use value::{
    dequantize_v, dequantize_v_into, quantize_v, quantize_v_with, IndexStorage,
    QuantizedValueBlock, ValueQuantConfig,
};

/// Bits per value coordinate on the product path.
pub const VALUE_BITS: u32 = 3;
