//! PKVD v1: the framework-neutral interchange file for prefill KV dumps.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PKVD"
//!      4     2  version (u16, = 1)
//!      6     2  flags (u16, bit0 = payload is f32; must be set)
//!      8     4  num_layers (u32)
//!     12     4  batch (u32)
//!     16     4  kv_heads (u32)
//!     20     4  seq_len (u32)
//!     24     4  head_dim (u32)
//!     28     2  baseline_bits (u16)
//!     30    14  reserved (zero)
//!     44     -  per layer: K payload then V payload, little-endian f32,
//!               row-major [batch, kv_heads, seq_len, head_dim]
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ByteReader, Header};
use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;
use crate::tensor::{KvDump, KvLayer, KvTensor};

pub const DUMP_MAGIC: [u8; 4] = *b"PKVD";
pub const DUMP_VERSION: u16 = 1;
pub const FLAG_PAYLOAD_F32: u16 = 0x0001;
pub const DUMP_HEADER_LEN: usize = 44;

/// Decoded PKVD header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub version: u16,
    pub flags: u16,
    pub geometry: ModelGeometry,
}

impl DumpHeader {
    pub fn for_geometry(geometry: ModelGeometry) -> Self {
        Self {
            version: DUMP_VERSION,
            flags: FLAG_PAYLOAD_F32,
            geometry,
        }
    }

    /// Number of f32 values following the header.
    pub fn payload_elements(&self) -> u64 {
        self.geometry.total_elements() as u64
    }

    pub fn payload_bytes(&self) -> u64 {
        self.payload_elements() * 4
    }

    pub fn file_len(&self) -> u64 {
        DUMP_HEADER_LEN as u64 + self.payload_bytes()
    }

    pub fn encode(&self) -> [u8; DUMP_HEADER_LEN] {
        let mut out = [0u8; DUMP_HEADER_LEN];
        let g = &self.geometry;
        out[0..4].copy_from_slice(&DUMP_MAGIC);
        out[4..6].copy_from_slice(&self.version.to_le_bytes());
        out[6..8].copy_from_slice(&self.flags.to_le_bytes());
        Header::put_geometry(&mut out[8..30], g);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(DUMP_MAGIC)?;
        let version = r.u16()?;
        if version != DUMP_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                offset: 4,
            });
        }
        let flags = r.u16()?;
        if flags != FLAG_PAYLOAD_F32 {
            return Err(Error::UnsupportedFlags { flags, offset: 6 });
        }
        let geometry = Header::get_geometry(&mut r)?;
        r.skip(14)?;
        Ok(Self {
            version,
            flags,
            geometry,
        })
    }
}

/// Parses a complete PKVD image held in memory.
pub fn decode_dump(bytes: &[u8]) -> Result<KvDump> {
    let header = DumpHeader::decode(bytes)?;
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
    let mut offset = DUMP_HEADER_LEN;
    let read_tensor = |offset: &mut usize| -> Result<KvTensor> {
        let raw = &bytes[*offset..*offset + 4 * n];
        let mut data = Vec::with_capacity(n);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let value = f32::from_le_bytes(chunk.try_into().unwrap());
            if !value.is_finite() {
                return Err(Error::NonFinitePayload {
                    offset: (*offset + 4 * i) as u64,
                    value,
                });
            }
            data.push(value);
        }
        *offset += 4 * n;
        Ok(KvTensor::from_trusted(shape, data))
    };

    let mut layers = Vec::with_capacity(geometry.num_layers);
    for _ in 0..geometry.num_layers {
        let k = read_tensor(&mut offset)?;
        let v = read_tensor(&mut offset)?;
        layers.push(KvLayer { k, v });
    }
    KvDump::new(geometry, layers)
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<KvDump> {
    let bytes = fs::read(path)?;
    decode_dump(&bytes)
}

pub fn write_dump_to<W: Write>(dump: &KvDump, mut out: W) -> Result<()> {
    dump.validate()?;
    out.write_all(&DumpHeader::for_geometry(*dump.geometry()).encode())?;
    let mut buf = Vec::new();
    for layer in dump.layers() {
        for t in [&layer.k, &layer.v] {
            buf.clear();
            buf.reserve(4 * t.len());
            for v in t.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_dump(dump: &KvDump, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_dump_to(dump, BufWriter::new(file))
}
