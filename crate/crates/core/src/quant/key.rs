//! q8_0 key quantization: one symmetric int8 scale per layer tensor.
//!
//! s = max|K| / 127, code = clip(round(K / s), -128, 127), K' = code * s.
//! `round` is half-away-from-zero.

use crate::error::{Error, Result};
use crate::geometry::TensorShape;
use crate::tensor::KvTensor;

pub const KEY_BITS: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedKeyBlock {
    shape: TensorShape,
    scale: f32,
    codes: Vec<i8>,
}

impl QuantizedKeyBlock {
    /// Reassembles a block from stored parts, e.g. a snapshot file.
    pub fn from_parts(shape: TensorShape, scale: f32, codes: Vec<i8>) -> Result<Self> {
        if codes.len() != shape.num_elements() {
            return Err(Error::ShapeMismatch {
                expected: shape.num_elements(),
                actual: codes.len(),
            });
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "key scale {scale} is not a finite non-negative value"
            )));
        }
        Ok(Self {
            shape,
            scale,
            codes,
        })
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn codes(&self) -> &[i8] {
        &self.codes
    }

    /// Payload bytes: one per code plus the f32 scale.
    pub fn physical_bytes(&self) -> u64 {
        self.codes.len() as u64 + 4
    }

    pub fn logical_bits(&self) -> u64 {
        self.codes.len() as u64 * u64::from(KEY_BITS)
    }

    /// Largest error dequantization can introduce for a value that was on the
    /// quantization range: half a step.
    pub fn half_step(&self) -> f32 {
        self.scale / 2.0
    }
}

pub fn quantize_k(tensor: &KvTensor) -> Result<QuantizedKeyBlock> {
    let data = tensor.as_slice();
    let mut max = 0.0f32;
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        max = max.max(value.abs());
    }
    if max == 0.0 {
        return Ok(QuantizedKeyBlock {
            shape: tensor.shape(),
            scale: 0.0,
            codes: vec![0; data.len()],
        });
    }
    let scale = max / 127.0;
    let inv = 1.0 / f64::from(scale);
    let codes = data
        .iter()
        .map(|&v| (f64::from(v) * inv).round().clamp(-128.0, 127.0) as i8)
        .collect();
    Ok(QuantizedKeyBlock {
        shape: tensor.shape(),
        scale,
        codes,
    })
}

pub fn dequantize_k(block: &QuantizedKeyBlock) -> KvTensor {
    let mut out = vec![0.0f32; block.codes.len()];
    dequantize_k_into(block, &mut out);
    KvTensor::from_trusted(block.shape, out)
}

/// Writes the reconstruction into a caller-owned buffer of matching length.
pub fn dequantize_k_into(block: &QuantizedKeyBlock, out: &mut [f32]) {
    assert_eq!(out.len(), block.codes.len());
    let s = block.scale;
    for (o, &c) in out.iter_mut().zip(&block.codes) {
        *o = f32::from(c) * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(n: usize) -> TensorShape {
        TensorShape {
            batch: 1,
            kv_heads: 1,
            seq_len: 1,
            head_dim: n,
        }
    }

    fn tensor(values: Vec<f32>) -> KvTensor {
        KvTensor::new(shape(values.len()), values).unwrap()
    }

    /// Scalar reference in exact arithmetic: q = clip(round_half_away(v/s)).
    fn reference_code(v: f32, s: f32) -> i8 {
        let r = f64::from(v) / f64::from(s);
        let q = r.abs().floor() + if r.abs().fract() >= 0.5 { 1.0 } else { 0.0 };
        (q.copysign(r)).clamp(-128.0, 127.0) as i8
    }

    #[test]
    fn zero_tensor() {
        let b = quantize_k(&tensor(vec![0.0; 8])).unwrap();
        assert_eq!(b.scale(), 0.0);
        assert!(b.codes().iter().all(|&c| c == 0));
        assert_eq!(dequantize_k(&b).as_slice(), &[0.0; 8]);
    }

    #[test]
    fn grid_aligned_values() {
        let b = quantize_k(&tensor(vec![-2.54, 0.0, 2.54])).unwrap();
        assert!((b.scale() - 0.02).abs() < 1e-8);
        assert_eq!(b.codes(), &[-127, 0, 127]);
        assert_eq!(dequantize_k(&b).as_slice(), &[-2.54, 0.0, 2.54]);
    }

    #[test]
    fn extremes_map_to_127() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let max: f32 = rng.gen_range(1e-6..1e6);
            let b = quantize_k(&tensor(vec![max, -max, max * 0.5])).unwrap();
            assert_eq!(b.codes()[0], 127);
            assert_eq!(b.codes()[1], -127);
        }
    }

    #[test]
    fn boundary_values_match_scalar_reference() {
        // Values at, just below and just above every half-step boundary.
        let max = 1.27f32;
        let s = max / 127.0;
        let mut values = vec![max, -max];
        for k in -127..127 {
            let edge = (k as f32 + 0.5) * s;
            values.extend([
                edge,
                f32::from_bits(edge.to_bits() + 1),
                f32::from_bits(edge.to_bits() - 1),
            ]);
        }
        values.retain(|v| v.abs() <= max);
        let b = quantize_k(&tensor(values.clone())).unwrap();
        assert_eq!(b.scale(), s);
        for (v, &c) in values.iter().zip(b.codes()) {
            assert_eq!(c, reference_code(*v, s), "v = {v}");
        }
        assert!(b.codes().iter().all(|&c| c >= -127));
    }

    #[test]
    fn random_roundtrip_within_half_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let values: Vec<f32> = (0..100_000).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t = tensor(values);
        let b = quantize_k(&t).unwrap();
        let d = dequantize_k(&b);
        let bound = f64::from(b.scale()) / 2.0;
        for (a, r) in t.as_slice().iter().zip(d.as_slice()) {
            let err = (f64::from(*a) - f64::from(*r)).abs();
            let ulp = f64::from(f32::EPSILON) * f64::from(r.abs());
            assert!(err <= bound + ulp, "err {err} > {bound}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let t = KvTensor::zeros(shape(4));
        let mut data = t.into_vec();
        data[2] = f32::INFINITY;
        // Bypass the tensor constructor to reach the quantizer's own check.
        let t = KvTensor::from_trusted(shape(4), data);
        assert!(matches!(
            quantize_k(&t),
            Err(Error::NonFinite { index: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn requantization_is_idempotent(values in prop::collection::vec(-100.0f32..100.0, 1..256)) {
            let b1 = quantize_k(&tensor(values)).unwrap();
            let b2 = quantize_k(&dequantize_k(&b1)).unwrap();
            prop_assert_eq!(b1.codes(), b2.codes());
            prop_assert_eq!(b1.scale(), b2.scale());
        }
    }
}
