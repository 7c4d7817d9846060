use std::hash::Hasher;

use fnv::FnvHasher;

use super::DecodePrecision;

/// Elements encoded per hasher write. Small groups let the two chains in
/// [`checksum_pair`] overlap in the pipeline.
const GROUP: usize = 8;

/// 64-bit FNV-1a over the little-endian byte image of a decoded tensor at the
/// given precision: 2 bytes per element for bfloat16, 4 for f32.
pub fn tensor_checksum(values: &[f32], precision: DecodePrecision) -> u64 {
    let mut h = FnvHasher::default();
    for chunk in values.chunks(GROUP) {
        feed(&mut h, chunk, precision);
    }
    h.finish()
}

/// `(tensor_checksum(a), tensor_checksum(b))`, computed in one interleaved pass.
pub fn checksum_pair(a: &[f32], b: &[f32], precision: DecodePrecision) -> (u64, u64) {
    let mut ha = FnvHasher::default();
    let mut hb = FnvHasher::default();
    let mut ca = a.chunks(GROUP);
    let mut cb = b.chunks(GROUP);
    loop {
        match (ca.next(), cb.next()) {
            (None, None) => break,
            (x, y) => {
                if let Some(x) = x {
                    feed(&mut ha, x, precision);
                }
                if let Some(y) = y {
                    feed(&mut hb, y, precision);
                }
            }
        }
    }
    (ha.finish(), hb.finish())
}

#[inline(always)]
fn feed(h: &mut FnvHasher, chunk: &[f32], precision: DecodePrecision) {
    let mut buf = [0u8; 4 * GROUP];
    match precision {
        DecodePrecision::Bf16 => {
            for (dst, v) in buf.chunks_exact_mut(2).zip(chunk) {
                dst.copy_from_slice(&half::bf16::from_f32(*v).to_le_bytes());
            }
            h.write(&buf[..2 * chunk.len()]);
        }
        DecodePrecision::F32 => {
            for (dst, v) in buf.chunks_exact_mut(4).zip(chunk) {
                dst.copy_from_slice(&v.to_le_bytes());
            }
            h.write(&buf[..4 * chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_reference_vectors() {
        // Published FNV-1a 64 test vectors.
        let mut h = FnvHasher::default();
        h.write(b"");
        assert_eq!(h.finish(), 0xcbf29ce484222325);
        let mut h = FnvHasher::default();
        h.write(b"a");
        assert_eq!(h.finish(), 0xaf63dc4c8601ec8c);
        let mut h = FnvHasher::default();
        h.write(b"foobar");
        assert_eq!(h.finish(), 0x85944171f73967e8);
    }

    #[test]
    fn checksum_covers_byte_image() {
        let values = [1.0f32, -2.5, 0.0];
        let mut bytes = Vec::new();
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut h = FnvHasher::default();
        h.write(&bytes);
        assert_eq!(tensor_checksum(&values, DecodePrecision::F32), h.finish());

        // 1.0, -2.5 and 0.0 are exact in bfloat16.
        let bf: [u8; 6] = [0x80, 0x3f, 0x20, 0xc0, 0x00, 0x00];
        let mut h = FnvHasher::default();
        h.write(&bf);
        assert_eq!(tensor_checksum(&values, DecodePrecision::Bf16), h.finish());
    }

    #[test]
    fn chunking_does_not_change_the_hash() {
        let values: Vec<f32> = (0..5000).map(|i| i as f32 * 0.37).collect();
        let mut bytes = Vec::new();
        for v in &values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut h = FnvHasher::default();
        h.write(&bytes);
        assert_eq!(tensor_checksum(&values, DecodePrecision::F32), h.finish());
    }

    #[test]
    fn pair_matches_single_checksums() {
        let a: Vec<f32> = (0..1001).map(|i| (i as f32).sin()).collect();
        let b: Vec<f32> = (0..77).map(|i| i as f32 - 30.0).collect();
        for p in [DecodePrecision::Bf16, DecodePrecision::F32] {
            assert_eq!(
                checksum_pair(&a, &b, p),
                (tensor_checksum(&a, p), tensor_checksum(&b, p))
            );
        }
    }
}
