//! The write-once compressed pool and the per-agent views that read it.
//!
//! A [`PoolBuilder`] quantizes a dump layer by layer and [`seal`]s into a
//! [`SharedPool`], which has no mutating methods. Agents hold an `Arc` to the
//! pool plus a few bytes of view state; every read decompresses into buffers
//! the caller owns, so the pool's footprint does not depend on how many
//! agents are attached.
//!
//! [`seal`]: PoolBuilder::seal

mod checksum;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

pub use checksum::{checksum_pair, tensor_checksum};

use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;
use crate::quant::{
    dequantize_k_into, dequantize_v_into, quantize_k, quantize_v_with, Codebook, QuantizedKeyBlock,
    QuantizedValueBlock, ValueQuantConfig, KEY_BITS,
};
use crate::tensor::{KvDump, KvLayer, KvTensor};

/// Element precision of tensors handed to agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodePrecision {
    /// Round-to-nearest-even to bfloat16 (values returned widened to f32).
    Bf16,
    F32,
}

impl DecodePrecision {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            16 => Ok(Self::Bf16),
            32 => Ok(Self::F32),
            other => Err(Error::UnsupportedPrecision(other)),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            Self::Bf16 => 16,
            Self::F32 => 32,
        }
    }

    fn apply(self, values: &mut [f32]) {
        if self == Self::Bf16 {
            for v in values {
                *v = half::bf16::from_f32(*v).to_f32();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PoolConfig {
    pub value: ValueQuantConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolLayer {
    pub key: QuantizedKeyBlock,
    pub value: QuantizedValueBlock,
}

impl PoolLayer {
    pub fn physical_bytes(&self) -> u64 {
        self.key.physical_bytes() + self.value.physical_bytes()
    }

    pub fn logical_bits(&self) -> u64 {
        self.key.logical_bits() + self.value.logical_bits()
    }
}

/// Quantization error of one layer measured at build time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LayerStats {
    pub k_mse: f64,
    pub v_mse: f64,
}

pub struct PoolBuilder {
    geometry: ModelGeometry,
    codebook: Codebook,
    config: PoolConfig,
    layers: Vec<PoolLayer>,
    stats: Vec<LayerStats>,
}

impl PoolBuilder {
    pub fn new(geometry: ModelGeometry, config: PoolConfig) -> Result<Self> {
        geometry.validate()?;
        Ok(Self {
            geometry,
            codebook: Codebook::gaussian_3bit(),
            config,
            layers: Vec::with_capacity(geometry.num_layers),
            stats: Vec::with_capacity(geometry.num_layers),
        })
    }

    /// Quantizes the next layer.
    pub fn push_layer(&mut self, layer: &KvLayer) -> Result<()> {
        if self.layers.len() == self.geometry.num_layers {
            return Err(Error::InvalidGeometry(format!(
                "pool already holds all {} layers",
                self.geometry.num_layers
            )));
        }
        let shape = self.geometry.tensor_shape();
        if layer.k.shape() != shape || layer.v.shape() != shape {
            return Err(Error::InvalidGeometry(format!(
                "layer shape does not match pool geometry {shape:?}"
            )));
        }
        let (pool_layer, stats) = compress_layer(layer, &self.codebook, self.config)?;
        self.layers.push(pool_layer);
        self.stats.push(stats);
        Ok(())
    }

    pub fn seal(self) -> Result<SharedPool> {
        if self.layers.len() != self.geometry.num_layers {
            return Err(Error::InvalidGeometry(format!(
                "cannot seal: {} of {} layers present",
                self.layers.len(),
                self.geometry.num_layers
            )));
        }
        Ok(SharedPool {
            geometry: self.geometry,
            codebook: self.codebook,
            config: self.config,
            layers: self.layers,
            build_stats: self.stats,
            next_agent: AtomicU64::new(0),
        })
    }
}

fn compress_layer(
    layer: &KvLayer,
    codebook: &Codebook,
    config: PoolConfig,
) -> Result<(PoolLayer, LayerStats)> {
    let key = quantize_k(&layer.k)?;
    let value = quantize_v_with(&layer.v, codebook, config.value)?;
    let n = layer.k.len();
    let mut buf = vec![0f32; n];
    dequantize_k_into(&key, &mut buf);
    let k_mse = mse(layer.k.as_slice(), &buf);
    dequantize_v_into(&value, codebook, &mut buf)?;
    let v_mse = mse(layer.v.as_slice(), &buf);
    Ok((PoolLayer { key, value }, LayerStats { k_mse, v_mse }))
}

fn mse(a: &[f32], b: &[f32]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2))
        .sum::<f64>()
        / a.len() as f64
}

/// Sealed, immutable compressed KV cache.
#[derive(Debug)]
pub struct SharedPool {
    geometry: ModelGeometry,
    codebook: Codebook,
    config: PoolConfig,
    layers: Vec<PoolLayer>,
    build_stats: Vec<LayerStats>,
    next_agent: AtomicU64,
}

impl PartialEq for SharedPool {
    /// Compares contents; the agent id counter is not part of a pool's value.
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry
            && self.codebook == other.codebook
            && self.config == other.config
            && self.layers == other.layers
    }
}

/// Quantizes every layer (in parallel) and seals the result.
pub fn build_pool(dump: &KvDump) -> Result<Arc<SharedPool>> {
    build_pool_with(dump, PoolConfig::default())
}

pub fn build_pool_with(dump: &KvDump, config: PoolConfig) -> Result<Arc<SharedPool>> {
    let mut builder = PoolBuilder::new(*dump.geometry(), config)?;
    let codebook = builder.codebook.clone();
    let compressed: Vec<_> = dump
        .layers()
        .par_iter()
        .map(|layer| compress_layer(layer, &codebook, config))
        .collect::<Result<_>>()?;
    for (layer, stats) in compressed {
        builder.layers.push(layer);
        builder.stats.push(stats);
    }
    builder.seal().map(Arc::new)
}

impl SharedPool {
    /// Assembles a sealed pool from already-quantized layers (snapshot load).
    /// Build statistics are unavailable and left at zero.
    pub fn from_layers(
        geometry: ModelGeometry,
        codebook: Codebook,
        config: PoolConfig,
        layers: Vec<PoolLayer>,
    ) -> Result<Self> {
        geometry.validate()?;
        if layers.len() != geometry.num_layers {
            return Err(Error::InvalidGeometry(format!(
                "geometry declares {} layers, got {}",
                geometry.num_layers,
                layers.len()
            )));
        }
        let shape = geometry.tensor_shape();
        if layers
            .iter()
            .any(|l| l.key.shape() != shape || l.value.shape() != shape)
        {
            return Err(Error::InvalidGeometry("layer shape mismatch".into()));
        }
        Ok(Self {
            geometry,
            build_stats: vec![LayerStats::default(); layers.len()],
            codebook,
            config,
            layers,
            next_agent: AtomicU64::new(0),
        })
    }

    pub fn geometry(&self) -> &ModelGeometry {
        &self.geometry
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn config(&self) -> PoolConfig {
        self.config
    }

    pub fn layers(&self) -> &[PoolLayer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Result<&PoolLayer> {
        self.layers.get(index).ok_or(Error::LayerOutOfRange {
            layer: index,
            num_layers: self.layers.len(),
        })
    }

    pub fn build_stats(&self) -> &[LayerStats] {
        &self.build_stats
    }

    /// Always true: a `SharedPool` only exists sealed.
    pub fn is_sealed(&self) -> bool {
        true
    }

    /// Quantized payload bytes: codes, indices and scales of every layer.
    pub fn payload_bytes(&self) -> u64 {
        self.layers.iter().map(PoolLayer::physical_bytes).sum()
    }

    /// Payload bits excluding scales: 8 per key element, 3 per value element.
    pub fn logical_payload_bits(&self) -> u64 {
        self.layers.iter().map(PoolLayer::logical_bits).sum()
    }

    pub fn key_bits(&self) -> u32 {
        KEY_BITS
    }

    pub fn attached_agents(&self) -> u64 {
        self.next_agent.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub u64);

/// One agent's handle on a shared pool: an `Arc` and decode settings.
#[derive(Debug, Clone)]
pub struct AgentCacheView {
    id: AgentId,
    pool: Arc<SharedPool>,
    precision: DecodePrecision,
}

pub fn attach_agent(pool: &Arc<SharedPool>, decode_bits: u32) -> Result<AgentCacheView> {
    let precision = DecodePrecision::from_bits(decode_bits)?;
    let id = AgentId(pool.next_agent.fetch_add(1, Ordering::Relaxed));
    Ok(AgentCacheView {
        id,
        pool: Arc::clone(pool),
        precision,
    })
}

impl AgentCacheView {
    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn pool(&self) -> &Arc<SharedPool> {
        &self.pool
    }

    pub fn precision(&self) -> DecodePrecision {
        self.precision
    }

    /// Freshly decompressed K and V for one layer.
    pub fn get_kv_for_layer(&self, layer: usize) -> Result<(KvTensor, KvTensor)> {
        let shape = self.pool.geometry.tensor_shape();
        let mut k = vec![0f32; shape.num_elements()];
        let mut v = vec![0f32; shape.num_elements()];
        self.get_kv_for_layer_into(layer, &mut k, &mut v)?;
        Ok((
            KvTensor::from_trusted(shape, k),
            KvTensor::from_trusted(shape, v),
        ))
    }

    /// Decompresses one layer into caller-owned buffers.
    pub fn get_kv_for_layer_into(&self, layer: usize, k: &mut [f32], v: &mut [f32]) -> Result<()> {
        let entry = self.pool.layer(layer)?;
        let n = self.pool.geometry.elements_per_tensor();
        if k.len() != n || v.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: k.len().min(v.len()),
            });
        }
        dequantize_k_into(&entry.key, k);
        dequantize_v_into(&entry.value, &self.pool.codebook, v)?;
        self.precision.apply(k);
        self.precision.apply(v);
        Ok(())
    }

    /// Decompresses one layer into `k` and `v` and checksums both.
    pub fn layer_entry(
        &self,
        layer: usize,
        k: &mut [f32],
        v: &mut [f32],
    ) -> Result<TranscriptEntry> {
        self.get_kv_for_layer_into(layer, k, v)?;
        let (k_checksum, v_checksum) = checksum_pair(k, v, self.precision);
        Ok(TranscriptEntry {
            layer,
            k_checksum,
            v_checksum,
            k_elements: k.len(),
            v_elements: v.len(),
        })
    }

    /// Materializes every layer in order, recording a checksum of each K and V
    /// the way a fresh inference cache would be filled.
    pub fn inject_all(&self) -> Result<InjectionTranscript> {
        let n = self.pool.geometry.elements_per_tensor();
        let mut k = vec![0f32; n];
        let mut v = vec![0f32; n];
        let entries = (0..self.pool.layers.len())
            .map(|layer| self.layer_entry(layer, &mut k, &mut v))
            .collect::<Result<Vec<_>>>()?;
        Ok(InjectionTranscript {
            agent: self.id,
            entries,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub layer: usize,
    pub k_checksum: u64,
    pub v_checksum: u64,
    pub k_elements: usize,
    pub v_elements: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionTranscript {
    pub agent: AgentId,
    pub entries: Vec<TranscriptEntry>,
}

impl InjectionTranscript {
    /// (K, V) checksum pairs in layer order, without the agent id.
    pub fn checksums(&self) -> Vec<(u64, u64)> {
        self.entries
            .iter()
            .map(|e| (e.k_checksum, e.v_checksum))
            .collect()
    }

    pub fn total_elements(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.k_elements + e.v_elements)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_gaussian_dump;

    fn small_dump(layers: usize) -> KvDump {
        let g = ModelGeometry::new(layers, 1, 2, 16, 32, 16).unwrap();
        synth_gaussian_dump(&g, 5).unwrap()
    }

    #[test]
    fn builds_sealed_pool() {
        let pool = build_pool(&small_dump(2)).unwrap();
        assert!(pool.is_sealed());
        assert_eq!(pool.layers().len(), 2);
        assert_eq!(pool.build_stats().len(), 2);
        assert!(pool
            .build_stats()
            .iter()
            .all(|s| s.k_mse > 0.0 && s.v_mse > 0.0));
    }

    #[test]
    fn build_is_deterministic() {
        let dump = small_dump(3);
        assert_eq!(*build_pool(&dump).unwrap(), *build_pool(&dump).unwrap());
    }

    #[test]
    fn builder_checks_layer_count() {
        let dump = small_dump(2);
        let mut b = PoolBuilder::new(*dump.geometry(), PoolConfig::default()).unwrap();
        b.push_layer(&dump.layers()[0]).unwrap();
        let mut b2 = PoolBuilder::new(*dump.geometry(), PoolConfig::default()).unwrap();
        b2.push_layer(&dump.layers()[0]).unwrap();
        assert!(b2.seal().is_err());
        b.push_layer(&dump.layers()[1]).unwrap();
        assert!(b.push_layer(&dump.layers()[1]).is_err());
        let sealed = b.seal().unwrap();
        assert_eq!(sealed, *build_pool(&dump).unwrap());
    }

    #[test]
    fn attach_validates_precision_and_assigns_ids() {
        let pool = build_pool(&small_dump(1)).unwrap();
        assert!(matches!(
            attach_agent(&pool, 8),
            Err(Error::UnsupportedPrecision(8))
        ));
        let a = attach_agent(&pool, 16).unwrap();
        let b = attach_agent(&pool, 32).unwrap();
        assert_ne!(a.id(), b.id());
        assert_eq!(pool.attached_agents(), 2);
    }

    #[test]
    fn attaching_does_not_change_payload() {
        let pool = build_pool(&small_dump(2)).unwrap();
        let before = pool.payload_bytes();
        let views: Vec<_> = (0..15).map(|_| attach_agent(&pool, 16).unwrap()).collect();
        assert_eq!(before, pool.payload_bytes());
        drop(views);
    }

    #[test]
    fn layer_reads_are_repeatable_and_bounded() {
        let pool = build_pool(&small_dump(2)).unwrap();
        let a = attach_agent(&pool, 32).unwrap();
        let b = attach_agent(&pool, 32).unwrap();
        assert_eq!(
            a.get_kv_for_layer(0).unwrap(),
            a.get_kv_for_layer(0).unwrap()
        );
        assert_eq!(
            a.get_kv_for_layer(1).unwrap(),
            b.get_kv_for_layer(1).unwrap()
        );
        assert!(matches!(
            a.get_kv_for_layer(2),
            Err(Error::LayerOutOfRange {
                layer: 2,
                num_layers: 2
            })
        ));
    }

    #[test]
    fn bf16_views_are_rounded() {
        let pool = build_pool(&small_dump(1)).unwrap();
        let (k16, _) = attach_agent(&pool, 16)
            .unwrap()
            .get_kv_for_layer(0)
            .unwrap();
        let (k32, _) = attach_agent(&pool, 32)
            .unwrap()
            .get_kv_for_layer(0)
            .unwrap();
        for (a, b) in k16.as_slice().iter().zip(k32.as_slice()) {
            assert_eq!(a.to_bits() & 0xffff, 0);
            assert_eq!(*a, half::bf16::from_f32(*b).to_f32());
        }
    }

    #[test]
    fn transcript_covers_all_layers() {
        let dump = small_dump(2);
        let pool = build_pool(&dump).unwrap();
        let t = attach_agent(&pool, 16).unwrap().inject_all().unwrap();
        let layers: Vec<_> = t.entries.iter().map(|e| e.layer).collect();
        assert_eq!(layers, vec![0, 1]);
        assert_eq!(t.total_elements(), dump.geometry().total_elements());
        let t2 = attach_agent(&pool, 16).unwrap().inject_all().unwrap();
        assert_eq!(t.checksums(), t2.checksums());
        assert_ne!(t.agent, t2.agent);
    }

    #[test]
    fn logical_ratio_matches_formula() {
        let dump = small_dump(2);
        let pool = build_pool(&dump).unwrap();
        let baseline_bits = dump.geometry().total_elements() as u64 * 16;
        // 16 / ((8 + 3) / 2) = 32 / 11.
        assert_eq!(pool.logical_payload_bits() * 32, baseline_bits * 11);
    }
}
