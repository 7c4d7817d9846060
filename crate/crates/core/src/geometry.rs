//! Model geometry and per-layer tensor shapes.

use crate::error::{Error, Result};

/// Shape of one layer's K or V tensor, laid out row-major as
/// `[batch, kv_heads, seq_len, head_dim]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorShape {
    pub batch: usize,
    pub kv_heads: usize,
    pub seq_len: usize,
    pub head_dim: usize,
}

impl TensorShape {
    pub fn num_elements(&self) -> usize {
        self.batch * self.kv_heads * self.seq_len * self.head_dim
    }

    /// Number of `head_dim`-long vectors, one per (batch, head, token).
    pub fn num_vectors(&self) -> usize {
        self.batch * self.kv_heads * self.seq_len
    }
}

/// Geometry of a full KV cache: layer count, per-layer tensor shape and the
/// element width of the uncompressed baseline used for memory accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelGeometry {
    pub num_layers: usize,
    pub batch: usize,
    pub kv_heads: usize,
    pub seq_len: usize,
    pub head_dim: usize,
    pub baseline_bits: u32,
}

impl ModelGeometry {
    pub fn new(
        num_layers: usize,
        batch: usize,
        kv_heads: usize,
        seq_len: usize,
        head_dim: usize,
        baseline_bits: u32,
    ) -> Result<Self> {
        let geometry = Self {
            num_layers,
            batch,
            kv_heads,
            seq_len,
            head_dim,
            baseline_bits,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Llama-3-8B: 32 layers, 8 KV heads (GQA), head_dim 128, bfloat16 cache.
    pub fn llama3_8b(seq_len: usize) -> Self {
        Self {
            num_layers: 32,
            batch: 1,
            kv_heads: 8,
            seq_len,
            head_dim: 128,
            baseline_bits: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_layers", self.num_layers),
            ("batch", self.batch),
            ("kv_heads", self.kv_heads),
            ("seq_len", self.seq_len),
            ("head_dim", self.head_dim),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidGeometry(format!("{name} must be at least 1")));
            }
            if value > u32::MAX as usize {
                return Err(Error::InvalidGeometry(format!(
                    "{name} = {value} exceeds u32"
                )));
            }
        }
        if !self.head_dim.is_power_of_two() {
            return Err(Error::InvalidGeometry(format!(
                "head_dim {} is not a power of two",
                self.head_dim
            )));
        }
        if !matches!(self.baseline_bits, 16 | 32) {
            return Err(Error::InvalidGeometry(format!(
                "baseline_bits must be 16 or 32, got {}",
                self.baseline_bits
            )));
        }
        self.batch
            .checked_mul(self.kv_heads)
            .and_then(|n| n.checked_mul(self.seq_len))
            .and_then(|n| n.checked_mul(self.head_dim))
            .and_then(|n| n.checked_mul(2 * self.num_layers))
            .ok_or_else(|| Error::InvalidGeometry("element count overflows".into()))?;
        Ok(())
    }

    pub fn tensor_shape(&self) -> TensorShape {
        TensorShape {
            batch: self.batch,
            kv_heads: self.kv_heads,
            seq_len: self.seq_len,
            head_dim: self.head_dim,
        }
    }

    pub fn elements_per_tensor(&self) -> usize {
        self.tensor_shape().num_elements()
    }

    /// Elements across every K and V tensor of every layer.
    pub fn total_elements(&self) -> usize {
        2 * self.num_layers * self.elements_per_tensor()
    }

    /// Bytes of one agent's uncompressed cache at `baseline_bits`.
    pub fn baseline_bytes(&self) -> u64 {
        self.total_elements() as u64 * u64::from(self.baseline_bits) / 8
    }

    pub fn with_seq_len(&self, seq_len: usize) -> Self {
        Self { seq_len, ..*self }
    }
}
