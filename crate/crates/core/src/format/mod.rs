//! Binary file formats: PKVD dumps and PKVP pool snapshots. Little-endian
//! throughout.

pub mod dump;
pub mod snapshot;

use crate::error::{Error, Result};
use crate::geometry::ModelGeometry;

pub use dump::{decode_dump, read_dump, write_dump, write_dump_to, DumpHeader};
pub use snapshot::{
    decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, SnapshotHeader,
};

/// Cursor over an in-memory file image that reports byte offsets on failure.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated {
                expected: (self.pos as u64).saturating_add(n as u64),
                actual: self.bytes.len() as u64,
                offset: self.pos as u64,
            }),
        }
    }

    pub(crate) fn skip(&mut self, n: usize) -> Result<()> {
        self.take(n).map(|_| ())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn expect_magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let offset = self.pos as u64;
        let found: [u8; 4] = self.take(4)?.try_into().unwrap();
        if found != expected {
            return Err(Error::BadMagic {
                expected,
                found,
                offset,
            });
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Geometry block shared by both headers: five u32 counts then baseline bits
/// as u16 (22 bytes).
pub(crate) struct Header;

impl Header {
    pub(crate) const GEOMETRY_LEN: usize = 22;

    pub(crate) fn put_geometry(out: &mut [u8], g: &ModelGeometry) {
        debug_assert_eq!(out.len(), Self::GEOMETRY_LEN);
        let counts = [g.num_layers, g.batch, g.kv_heads, g.seq_len, g.head_dim];
        for (i, c) in counts.into_iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(&(c as u32).to_le_bytes());
        }
        out[20..22].copy_from_slice(&(g.baseline_bits as u16).to_le_bytes());
    }

    pub(crate) fn get_geometry(r: &mut ByteReader<'_>) -> Result<ModelGeometry> {
        let num_layers = r.u32()? as usize;
        let batch = r.u32()? as usize;
        let kv_heads = r.u32()? as usize;
        let seq_len = r.u32()? as usize;
        let head_dim = r.u32()? as usize;
        let baseline_bits = u32::from(r.u16()?);
        ModelGeometry::new(
            num_layers,
            batch,
            kv_heads,
            seq_len,
            head_dim,
            baseline_bits,
        )
    }
}
