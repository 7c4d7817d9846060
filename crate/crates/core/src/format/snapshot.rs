//! PKVP v1: a sealed pool written to disk.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PKVP"
//!      4     2  version (u16, = 1)
//!      6     2  flags (u16): bit0 = value indices packed 3-bit,
//!                            bit1 = random sign diagonal in use
//!      8    22  geometry: num_layers, batch, kv_heads, seq_len, head_dim
//!               (u32 each), baseline_bits (u16)
//!     30     2  value codebook id (u16)
//!     32     1  key bits (u8, = 8)
//!     33     1  value bits (u8, = 3)
//!     34     8  sign diagonal seed (u64, zero when bit1 is clear)
//!     42     6  reserved (zero)
//!     48     -  per layer:
//!                 K scale (f32)
//!                 K codes (n x i8)
//!                 V per-vector scales (n / head_dim x f32)
//!                 V indices (n x u8, or ceil(n/8)*3 bytes when packed)
//! ```
//!
//! n is batch * kv_heads * seq_len * head_dim.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ByteReader, Header};
use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;
use crate::pool::{PoolConfig, PoolLayer, SharedPool};
use crate::quant::pack::packed3_len;
use crate::quant::{
    Codebook, CodebookId, IndexStorage, QuantizedKeyBlock, QuantizedValueBlock, ValueQuantConfig,
    KEY_BITS, VALUE_BITS,
};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"PKVP";
pub const SNAPSHOT_VERSION: u16 = 1;
pub const FLAG_PACKED: u16 = 0x0001;
pub const FLAG_SIGN_DIAGONAL: u16 = 0x0002;
pub const SNAPSHOT_HEADER_LEN: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotHeader {
    pub geometry: ModelGeometry,
    pub codebook_id: CodebookId,
    pub packed: bool,
    pub sign_seed: Option<u64>,
}

impl SnapshotHeader {
    pub fn for_pool(pool: &SharedPool) -> Self {
        let config = pool.config().value;
        Self {
            geometry: *pool.geometry(),
            codebook_id: pool.codebook().id(),
            packed: config.packed,
            sign_seed: config.sign_seed,
        }
    }

    fn flags(&self) -> u16 {
        let mut flags = 0;
        if self.packed {
            flags |= FLAG_PACKED;
        }
        if self.sign_seed.is_some() {
            flags |= FLAG_SIGN_DIAGONAL;
        }
        flags
    }

    pub fn encode(&self) -> [u8; SNAPSHOT_HEADER_LEN] {
        let mut out = [0u8; SNAPSHOT_HEADER_LEN];
        out[0..4].copy_from_slice(&SNAPSHOT_MAGIC);
        out[4..6].copy_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out[6..8].copy_from_slice(&self.flags().to_le_bytes());
        Header::put_geometry(&mut out[8..30], &self.geometry);
        out[30..32].copy_from_slice(&self.codebook_id.0.to_le_bytes());
        out[32] = KEY_BITS as u8;
        out[33] = VALUE_BITS as u8;
        out[34..42].copy_from_slice(&self.sign_seed.unwrap_or(0).to_le_bytes());
        out
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        r.expect_magic(SNAPSHOT_MAGIC)?;
        let version = r.u16()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                offset: 4,
            });
        }
        let flags = r.u16()?;
        if flags & !(FLAG_PACKED | FLAG_SIGN_DIAGONAL) != 0 {
            return Err(Error::UnsupportedFlags { flags, offset: 6 });
        }
        let geometry = Header::get_geometry(r)?;
        let codebook_id = CodebookId(r.u16()?);
        if codebook_id != CodebookId::GAUSSIAN_3BIT {
            return Err(Error::InvalidCodebook(format!(
                "unknown codebook id {} at byte offset 30",
                codebook_id.0
            )));
        }
        let key_bits = r.u8()?;
        let value_bits = r.u8()?;
        if u32::from(key_bits) != KEY_BITS || u32::from(value_bits) != VALUE_BITS {
            return Err(Error::UnsupportedFlags {
                flags: u16::from_le_bytes([key_bits, value_bits]),
                offset: 32,
            });
        }
        let seed = r.u64()?;
        r.skip(6)?;
        Ok(Self {
            geometry,
            codebook_id,
            packed: flags & FLAG_PACKED != 0,
            sign_seed: (flags & FLAG_SIGN_DIAGONAL != 0).then_some(seed),
        })
    }

    fn layer_bytes(&self) -> u64 {
        let shape = self.geometry.tensor_shape();
        let n = shape.num_elements() as u64;
        let indices = if self.packed {
            packed3_len(shape.num_elements()) as u64
        } else {
            n
        };
        4 + n + 4 * shape.num_vectors() as u64 + indices
    }

    pub fn file_len(&self) -> u64 {
        SNAPSHOT_HEADER_LEN as u64 + self.geometry.num_layers as u64 * self.layer_bytes()
    }
}

pub fn encode_snapshot<W: Write>(pool: &SharedPool, mut out: W) -> Result<()> {
    let header = SnapshotHeader::for_pool(pool);
    out.write_all(&header.encode())?;
    for layer in pool.layers() {
        out.write_all(&layer.key.scale().to_le_bytes())?;
        let codes: Vec<u8> = layer.key.codes().iter().map(|&c| c as u8).collect();
        out.write_all(&codes)?;
        let mut scales = Vec::with_capacity(4 * layer.value.scales().len());
        for s in layer.value.scales() {
            scales.extend_from_slice(&s.to_le_bytes());
        }
        out.write_all(&scales)?;
        out.write_all(layer.value.indices().raw_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SharedPool> {
    let mut r = ByteReader::new(bytes);
    let header = SnapshotHeader::decode(&mut r)?;
    let expected = header.file_len();
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated {
            expected,
            actual,
            offset: actual,
        });
    }
    if actual > expected {
        return Err(Error::SizeMismatch { expected, actual });
    }

    let geometry = header.geometry;
    let shape = geometry.tensor_shape();
    let n = shape.num_elements();
    let mut layers = Vec::with_capacity(geometry.num_layers);
    for _ in 0..geometry.num_layers {
        let at = r.position() as u64;
        let k_scale = r.f32()?;
        if !(k_scale.is_finite() && k_scale >= 0.0) {
            return Err(Error::NonFinitePayload {
                offset: at,
                value: k_scale,
            });
        }
        let codes = r.take(n)?.iter().map(|&b| b as i8).collect();
        let key = QuantizedKeyBlock::from_parts(shape, k_scale, codes)?;

        let mut scales = Vec::with_capacity(shape.num_vectors());
        for _ in 0..shape.num_vectors() {
            let at = r.position() as u64;
            let s = r.f32()?;
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::NonFinitePayload {
                    offset: at,
                    value: s,
                });
            }
            scales.push(s);
        }
        let indices = if header.packed {
            IndexStorage::Packed3 {
                data: r.take(packed3_len(n))?.to_vec(),
                len: n,
            }
        } else {
            IndexStorage::Bytes(r.take(n)?.to_vec())
        };
        let value = QuantizedValueBlock::from_parts(
            shape,
            header.codebook_id,
            VALUE_BITS as u8,
            scales,
            indices,
            header.sign_seed,
        )?;
        layers.push(PoolLayer { key, value });
    }
    debug_assert_eq!(r.remaining(), 0);

    let config = PoolConfig {
        value: ValueQuantConfig {
            sign_seed: header.sign_seed,
            packed: header.packed,
        },
    };
    SharedPool::from_layers(geometry, Codebook::gaussian_3bit(), config, layers)
}

pub fn write_snapshot(pool: &SharedPool, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    encode_snapshot(pool, BufWriter::new(file))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<SharedPool> {
    decode_snapshot(&fs::read(path)?)
}
