//! Reconstruction error of a pool against the dump it was built from.

use super::ratio::compression_ratio;
use crate::error::{Error, Result};
use crate::pool::SharedPool;
use crate::quant::{dequantize_k_into, dequantize_v_into, DistortionBound, KEY_BITS, VALUE_BITS};
use crate::tensor::KvDump;

/// Relative slack on the q8_0 half-step bound.
pub const KEY_BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerDistortion {
    pub layer: usize,
    pub k_scale: f32,
    pub k_max_abs_error: f64,
    /// Largest amount by which any key error exceeds half a step, in units of
    /// the f32 ulp of the reconstructed element. Zero when none does.
    pub k_max_excess_ulps: f64,
    pub k_mse: f64,
    /// Mean over non-zero vectors of ||v - v'||² / ||v||², i.e. per-coordinate
    /// MSE in units of each vector's mean square.
    pub v_normalized_mse: f64,
    pub v_mse: f64,
}

impl LayerDistortion {
    /// Half a step with a relative slack of [`KEY_BOUND_SLACK`].
    pub fn k_bound(&self) -> f64 {
        f64::from(self.k_scale) / 2.0 * (1.0 + KEY_BOUND_SLACK)
    }

    pub fn k_within_relative_bound(&self) -> bool {
        self.k_max_abs_error <= self.k_bound()
    }

    /// Every key element is within half a step plus half an ulp of its f32
    /// reconstruction.
    pub fn k_within_bound(&self) -> bool {
        self.k_max_excess_ulps <= 0.5
    }
}

fn ulp(x: f32) -> f64 {
    let a = x.abs();
    if a == f32::MAX {
        return f64::from(a) - f64::from(f32::from_bits(a.to_bits() - 1));
    }
    f64::from(f32::from_bits(a.to_bits() + 1)) - f64::from(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub k_bits: u32,
    pub v_bits: u32,
    pub baseline_bits: u32,
    /// Payload bits only.
    pub logical_ratio: f64,
    /// Including per-tensor and per-vector scales.
    pub physical_ratio: f64,
    pub baseline_bytes: u64,
    pub pool_bytes: u64,
    pub v_bound: f64,
    pub layers: Vec<LayerDistortion>,
}

impl CompressionReport {
    /// Ratio arithmetic only, for pools with no original to compare against.
    pub fn for_pool(pool: &SharedPool) -> Result<Self> {
        let g = pool.geometry();
        let baseline_bytes = g.baseline_bytes();
        let pool_bytes = pool.payload_bytes();
        Ok(Self {
            k_bits: KEY_BITS,
            v_bits: VALUE_BITS,
            baseline_bits: g.baseline_bits,
            logical_ratio: compression_ratio(KEY_BITS, VALUE_BITS, g.baseline_bits)?.value(),
            physical_ratio: baseline_bytes as f64 / pool_bytes as f64,
            baseline_bytes,
            pool_bytes,
            v_bound: DistortionBound::new(VALUE_BITS as u8).bound,
            layers: Vec::new(),
        })
    }

    /// Layers whose normalized V error exceeds the b-bit distortion bound.
    pub fn v_bound_violations(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| l.v_normalized_mse > self.v_bound)
            .map(|l| l.layer)
            .collect()
    }

    pub fn k_bound_violations(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| !l.k_within_bound())
            .map(|l| l.layer)
            .collect()
    }

    /// Mean of the per-layer normalized V errors.
    pub fn mean_v_normalized_mse(&self) -> f64 {
        if self.layers.is_empty() {
            return 0.0;
        }
        self.layers.iter().map(|l| l.v_normalized_mse).sum::<f64>() / self.layers.len() as f64
    }
}

/// Decodes every layer at full precision and measures it against `original`.
pub fn distortion_report(original: &KvDump, pool: &SharedPool) -> Result<CompressionReport> {
    if original.geometry() != pool.geometry() {
        return Err(Error::InvalidGeometry(format!(
            "dump geometry {:?} does not match pool geometry {:?}",
            original.geometry(),
            pool.geometry()
        )));
    }
    let mut report = CompressionReport::for_pool(pool)?;
    let g = pool.geometry();
    let d = g.head_dim;
    let mut buf = vec![0f32; g.elements_per_tensor()];
    for (i, (src, entry)) in original.layers().iter().zip(pool.layers()).enumerate() {
        dequantize_k_into(&entry.key, &mut buf);
        let half = f64::from(entry.key.scale()) / 2.0;
        let mut k_max = 0f64;
        let mut k_excess = 0f64;
        let mut k_sq = 0f64;
        for (a, b) in src.k.as_slice().iter().zip(&buf) {
            let e = (f64::from(*a) - f64::from(*b)).abs();
            k_max = k_max.max(e);
            if e > half {
                k_excess = k_excess.max((e - half) / ulp(*b));
            }
            k_sq += e * e;
        }

        dequantize_v_into(&entry.value, pool.codebook(), &mut buf)?;
        let mut v_sq = 0f64;
        let mut ratio_sum = 0f64;
        let mut nonzero = 0usize;
        for (a, b) in src.v.as_slice().chunks_exact(d).zip(buf.chunks_exact(d)) {
            let mut err = 0f64;
            let mut energy = 0f64;
            for (x, y) in a.iter().zip(b) {
                err += (f64::from(*x) - f64::from(*y)).powi(2);
                energy += f64::from(*x).powi(2);
            }
            v_sq += err;
            if energy > 0.0 {
                ratio_sum += err / energy;
                nonzero += 1;
            }
        }

        let n = buf.len() as f64;
        report.layers.push(LayerDistortion {
            layer: i,
            k_scale: entry.key.scale(),
            k_max_abs_error: k_max,
            k_max_excess_ulps: k_excess,
            k_mse: k_sq / n,
            v_normalized_mse: if nonzero == 0 {
                0.0
            } else {
                ratio_sum / nonzero as f64
            },
            v_mse: v_sq / n,
        });
    }
    Ok(report)
}
