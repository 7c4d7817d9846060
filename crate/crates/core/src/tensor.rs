use crate::error::{Error, Result};
use crate::geometry::{ModelGeometry, TensorShape};

/// One layer's K or V tensor, row-major `[batch, kv_heads, seq_len, head_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KvTensor {
    shape: TensorShape,
    data: Vec<f32>,
}

impl KvTensor {
    /// Builds a tensor, rejecting element-count mismatches and NaN/Inf values.
    pub fn new(shape: TensorShape, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.num_elements() {
            return Err(Error::ShapeMismatch {
                expected: shape.num_elements(),
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: TensorShape) -> Self {
        Self {
            data: vec![0.0; shape.num_elements()],
            shape,
        }
    }

    /// Skips the finiteness scan. Only for data produced by this crate's own
    /// decoders, which cannot emit non-finite values from finite inputs.
    pub(crate) fn from_trusted(shape: TensorShape, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), shape.num_elements());
        Self { shape, data }
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Iterates over the `head_dim`-long vectors in storage order.
    pub fn vectors(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.shape.head_dim)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvLayer {
    pub k: KvTensor,
    pub v: KvTensor,
}

/// A prefill snapshot: one K/V pair per layer, all sharing the dump geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct KvDump {
    geometry: ModelGeometry,
    layers: Vec<KvLayer>,
}

impl KvDump {
    pub fn new(geometry: ModelGeometry, layers: Vec<KvLayer>) -> Result<Self> {
        let dump = Self { geometry, layers };
        dump.validate()?;
        Ok(dump)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { geometry, layers } = self;
        geometry.validate()?;
        if layers.len() != geometry.num_layers {
            return Err(Error::InvalidGeometry(format!(
                "geometry declares {} layers, dump has {}",
                geometry.num_layers,
                layers.len()
            )));
        }
        let shape = geometry.tensor_shape();
        for (i, layer) in layers.iter().enumerate() {
            for (name, t) in [("K", &layer.k), ("V", &layer.v)] {
                if t.shape() != shape {
                    return Err(Error::InvalidGeometry(format!(
                        "layer {i} {name} has shape {:?}, dump geometry implies {shape:?}",
                        t.shape()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> &ModelGeometry {
        &self.geometry
    }

    pub fn layers(&self) -> &[KvLayer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Option<&KvLayer> {
        self.layers.get(index)
    }
}
