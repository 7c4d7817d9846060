//! Rotation-based 3-bit value quantization.
//!
//! Each `head_dim` vector is rotated by H/sqrt(d), divided by the RMS of the
//! rotated coordinates (kept as a per-vector scale) and coded coordinate-wise
//! against a scalar codebook tuned for N(0, 1). Decoding looks up centroids,
//! multiplies by the scale and applies the inverse rotation.

use super::codebook::{Codebook, CodebookId};
use super::pack::{pack3, packed3_len, unpack3, unpack3_into};
use crate::error::{Error, Result};
use crate::fwht::{butterflies, HadamardOrder, SignDiagonal};
use crate::geometry::TensorShape;
use crate::tensor::KvTensor;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValueQuantConfig {
    /// Seed of a random +-1 diagonal applied before the rotation. `None`
    /// rotates with the plain Hadamard matrix.
    pub sign_seed: Option<u64>,
    /// Store indices packed 8-per-3-bytes instead of one per byte.
    pub packed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexStorage {
    /// One index per byte.
    Bytes(Vec<u8>),
    /// 3-bit indices packed by [`pack3`]; `len` is the index count.
    Packed3 { data: Vec<u8>, len: usize },
}

impl IndexStorage {
    pub fn len(&self) -> usize {
        match self {
            IndexStorage::Bytes(b) => b.len(),
            IndexStorage::Packed3 { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_packed(&self) -> bool {
        matches!(self, IndexStorage::Packed3 { .. })
    }

    pub fn byte_len(&self) -> usize {
        match self {
            IndexStorage::Bytes(b) => b.len(),
            IndexStorage::Packed3 { data, .. } => data.len(),
        }
    }

    pub fn raw_bytes(&self) -> &[u8] {
        match self {
            IndexStorage::Bytes(b) => b,
            IndexStorage::Packed3 { data, .. } => data,
        }
    }

    /// All indices, one per byte.
    pub fn to_indices(&self) -> Vec<u8> {
        match self {
            IndexStorage::Bytes(b) => b.clone(),
            IndexStorage::Packed3 { data, len } => unpack3(data, *len),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedValueBlock {
    shape: TensorShape,
    codebook_id: CodebookId,
    bits: u8,
    scales: Vec<f32>,
    indices: IndexStorage,
    signs: Option<SignDiagonal>,
}

impl QuantizedValueBlock {
    /// Reassembles a block from stored parts. Index values are not range
    /// checked here; decoding reports out-of-range codes.
    pub fn from_parts(
        shape: TensorShape,
        codebook_id: CodebookId,
        bits: u8,
        scales: Vec<f32>,
        indices: IndexStorage,
        sign_seed: Option<u64>,
    ) -> Result<Self> {
        let order = HadamardOrder::new(shape.head_dim)?;
        if scales.len() != shape.num_vectors() {
            return Err(Error::ShapeMismatch {
                expected: shape.num_vectors(),
                actual: scales.len(),
            });
        }
        if indices.len() != shape.num_elements() {
            return Err(Error::ShapeMismatch {
                expected: shape.num_elements(),
                actual: indices.len(),
            });
        }
        if let IndexStorage::Packed3 { data, len } = &indices {
            if bits != 3 || data.len() != packed3_len(*len) {
                return Err(Error::InvalidArgument(
                    "packed index storage requires 3-bit codes".into(),
                ));
            }
        }
        if !(1..=8).contains(&bits) {
            return Err(Error::InvalidArgument(format!(
                "{bits}-bit codes are not supported"
            )));
        }
        Ok(Self {
            shape,
            codebook_id,
            bits,
            scales,
            indices,
            signs: sign_seed.map(|seed| SignDiagonal::new(order, seed)),
        })
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn codebook_id(&self) -> CodebookId {
        self.codebook_id
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// Per-vector RMS of the rotated coordinates.
    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn indices(&self) -> &IndexStorage {
        &self.indices
    }

    pub fn sign_seed(&self) -> Option<u64> {
        self.signs.as_ref().map(SignDiagonal::seed)
    }

    pub fn is_packed(&self) -> bool {
        self.indices.is_packed()
    }

    /// Same codes in the other storage layout.
    pub fn with_packing(&self, packed: bool) -> Result<Self> {
        if packed == self.is_packed() {
            return Ok(self.clone());
        }
        let indices = if packed {
            if self.bits != 3 {
                return Err(Error::InvalidArgument(
                    "only 3-bit codes can be packed".into(),
                ));
            }
            let all = self.indices.to_indices();
            IndexStorage::Packed3 {
                data: pack3(&all),
                len: all.len(),
            }
        } else {
            IndexStorage::Bytes(self.indices.to_indices())
        };
        Ok(Self {
            indices,
            ..self.clone()
        })
    }

    /// Payload bytes: index storage plus one f32 scale per vector.
    pub fn physical_bytes(&self) -> u64 {
        self.indices.byte_len() as u64 + 4 * self.scales.len() as u64
    }

    pub fn logical_bits(&self) -> u64 {
        self.indices.len() as u64 * u64::from(self.bits)
    }
}

pub fn quantize_v(tensor: &KvTensor, codebook: &Codebook) -> Result<QuantizedValueBlock> {
    quantize_v_with(tensor, codebook, ValueQuantConfig::default())
}

pub fn quantize_v_with(
    tensor: &KvTensor,
    codebook: &Codebook,
    config: ValueQuantConfig,
) -> Result<QuantizedValueBlock> {
    let shape = tensor.shape();
    let order = HadamardOrder::new(shape.head_dim)?;
    if config.packed && codebook.bits() != 3 {
        return Err(Error::InvalidArgument(
            "packed storage requires a 3-bit codebook".into(),
        ));
    }
    let signs = config.sign_seed.map(|seed| SignDiagonal::new(order, seed));
    let d = order.size();
    let norm = order.norm_factor();

    let mut scales = Vec::with_capacity(shape.num_vectors());
    let mut codes = vec![0u8; shape.num_elements()];
    let mut buf = vec![0f32; d];
    for (vector, out) in tensor.vectors().zip(codes.chunks_exact_mut(d)) {
        buf.copy_from_slice(vector);
        if let Some((index, &value)) = buf.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let base = scales.len() * d;
            return Err(Error::NonFinite {
                index: base + index,
                value,
            });
        }
        if let Some(s) = &signs {
            s.apply(&mut buf);
        }
        butterflies(&mut buf);
        let mut sum_sq = 0f64;
        for v in &mut buf {
            *v *= norm;
            sum_sq += f64::from(*v) * f64::from(*v);
        }
        let rms = (sum_sq / d as f64).sqrt() as f32;
        scales.push(rms);
        if rms == 0.0 {
            continue;
        }
        let inv = 1.0 / rms;
        for (o, &v) in out.iter_mut().zip(&buf) {
            *o = codebook.nearest(v * inv);
        }
    }

    let indices = if config.packed {
        IndexStorage::Packed3 {
            data: pack3(&codes),
            len: codes.len(),
        }
    } else {
        IndexStorage::Bytes(codes)
    };
    Ok(QuantizedValueBlock {
        shape,
        codebook_id: codebook.id(),
        bits: codebook.bits(),
        scales,
        indices,
        signs,
    })
}

pub fn dequantize_v(block: &QuantizedValueBlock, codebook: &Codebook) -> Result<KvTensor> {
    let mut out = vec![0f32; block.shape.num_elements()];
    dequantize_v_into(block, codebook, &mut out)?;
    Ok(KvTensor::from_trusted(block.shape, out))
}

/// Decodes into a caller-owned buffer of `num_elements` floats.
pub fn dequantize_v_into(
    block: &QuantizedValueBlock,
    codebook: &Codebook,
    out: &mut [f32],
) -> Result<()> {
    if block.codebook_id != codebook.id() || block.bits != codebook.bits() {
        return Err(Error::CodebookMismatch {
            block: block.codebook_id.0,
            given: codebook.id().0,
        });
    }
    if out.len() != block.shape.num_elements() {
        return Err(Error::ShapeMismatch {
            expected: block.shape.num_elements(),
            actual: out.len(),
        });
    }
    let d = block.shape.head_dim;
    let norm = HadamardOrder::new(d)?.norm_factor();
    let centroids = codebook.centroids();
    let mut unpacked = vec![0u8; d];

    for (v, (dst, &scale)) in out.chunks_exact_mut(d).zip(&block.scales).enumerate() {
        let start = v * d;
        let idx: &[u8] = match &block.indices {
            IndexStorage::Bytes(b) => &b[start..start + d],
            IndexStorage::Packed3 { data, .. } => {
                unpack3_into(data, start, &mut unpacked);
                &unpacked
            }
        };
        for (j, (o, &c)) in dst.iter_mut().zip(idx).enumerate() {
            match centroids.get(usize::from(c)) {
                Some(&centroid) => *o = centroid * scale,
                None => {
                    return Err(Error::InvalidCode {
                        code: c,
                        bits: block.bits,
                        index: start + j,
                    })
                }
            }
        }
        butterflies(dst);
        for o in dst.iter_mut() {
            *o *= norm;
        }
        if let Some(s) = &block.signs {
            s.apply(dst);
        }
    }
    Ok(())
}
