//! Asymmetric KV-cache compression with a write-once pool shared by many
//! concurrent readers.
//!
//! Keys are stored as per-tensor int8 (q8_0). Values are rotated with a
//! normalized Walsh-Hadamard transform and coded at 3 bits per coordinate
//! against a fixed Gaussian Lloyd-Max codebook. A [`SharedPool`] is built once
//! from a prefill dump and sealed; any number of [`AgentCacheView`]s then
//! decompress layers from it on demand without copying the compressed data.
//!
//! ```
//! use kvshare_core::{attach_agent, build_pool, synth_gaussian_dump, ModelGeometry};
//!
//! let geometry = ModelGeometry::new(2, 1, 2, 16, 64, 16)?;
//! let dump = synth_gaussian_dump(&geometry, 7)?;
//! let pool = build_pool(&dump)?;
//! let agent = attach_agent(&pool, 16)?;
//! let (k, v) = agent.get_kv_for_layer(0)?;
//! assert_eq!(k.shape(), geometry.tensor_shape());
//! assert_eq!(v.len(), geometry.elements_per_tensor());
//! # Ok::<(), kvshare_core::Error>(())
//! ```

pub mod error;
pub mod format;
pub mod fwht;
pub mod geometry;
pub mod metrics;
pub mod pool;
pub mod quant;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use format::{read_dump, read_snapshot, write_dump, write_snapshot};
pub use fwht::{fwht_inplace, rotate_forward, rotate_inverse, HadamardOrder};
pub use geometry::{ModelGeometry, TensorShape};
pub use metrics::{
    compression_ratio, distortion_report, memory_table, ppl_delta, CompressionReport,
};
pub use pool::{
    attach_agent, build_pool, build_pool_with, AgentCacheView, DecodePrecision,
    InjectionTranscript, PoolConfig, SharedPool,
};
pub use quant::{
    dequantize_k, dequantize_v, lloyd_max_train, nearest_centroid, quantize_k, quantize_v,
    Codebook, QuantizedKeyBlock, QuantizedValueBlock,
};
pub use synth::{gaussian_samples, synth_gaussian_dump};
pub use tensor::{KvDump, KvLayer, KvTensor};
