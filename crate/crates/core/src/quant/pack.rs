//! Dense 3-bit index packing: every 8 indices occupy 3 bytes, index `i` of a
//! group at bits `3i..3i+3` of the little-endian 24-bit group word.

/// Bytes needed to pack `n` 3-bit indices.
pub fn packed3_len(n: usize) -> usize {
    n.div_ceil(8) * 3
}

/// Packs indices (each < 8) into groups of 3 bytes. A trailing partial group
/// is zero-padded.
pub fn pack3(indices: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(packed3_len(indices.len()));
    for group in indices.chunks(8) {
        let mut word = 0u32;
        for (i, &idx) in group.iter().enumerate() {
            debug_assert!(idx < 8);
            word |= u32::from(idx & 7) << (3 * i);
        }
        out.extend_from_slice(&word.to_le_bytes()[..3]);
    }
    out
}

#[inline]
fn group_word(packed: &[u8], group: usize) -> u32 {
    let b = &packed[3 * group..3 * group + 3];
    u32::from(b[0]) | u32::from(b[1]) << 8 | u32::from(b[2]) << 16
}

/// Unpacks `out.len()` indices starting at index `start`.
pub fn unpack3_into(packed: &[u8], start: usize, out: &mut [u8]) {
    if start.is_multiple_of(8) && out.len().is_multiple_of(8) {
        for (g, chunk) in out.chunks_exact_mut(8).enumerate() {
            let word = group_word(packed, start / 8 + g);
            for (i, o) in chunk.iter_mut().enumerate() {
                *o = ((word >> (3 * i)) & 7) as u8;
            }
        }
    } else {
        for (k, o) in out.iter_mut().enumerate() {
            let i = start + k;
            *o = ((group_word(packed, i / 8) >> (3 * (i % 8))) & 7) as u8;
        }
    }
}

pub fn unpack3(packed: &[u8], n: usize) -> Vec<u8> {
    let mut out = vec![0; n];
    unpack3_into(packed, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let packed = pack3(&[1, 2, 3, 4, 5, 6, 7, 0]);
        let word = 1 | 2 << 3 | 3 << 6 | 4 << 9 | 5 << 12 | 6 << 15 | 7 << 18;
        assert_eq!(packed, (word as u32).to_le_bytes()[..3].to_vec());
        assert_eq!(packed3_len(8), 3);
        assert_eq!(packed3_len(9), 6);
        assert_eq!(packed3_len(0), 0);
    }

    proptest! {
        #[test]
        fn unpack_inverts_pack(indices in prop::collection::vec(0u8..8, 0..300), start in 0usize..300) {
            let packed = pack3(&indices);
            prop_assert_eq!(packed.len(), packed3_len(indices.len()));
            prop_assert_eq!(unpack3(&packed, indices.len()), indices.clone());
            let start = start.min(indices.len());
            let mut tail = vec![0; indices.len() - start];
            unpack3_into(&packed, start, &mut tail);
            prop_assert_eq!(&tail[..], &indices[start..]);
        }
    }
}
