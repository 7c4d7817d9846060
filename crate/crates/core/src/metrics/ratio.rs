use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// baseline / mean(k_bits, v_bits), kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionRatio(Ratio<u64>);

impl CompressionRatio {
    pub fn exact(&self) -> Ratio<u64> {
        self.0
    }

    pub fn value(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.value())
    }
}

/// Logical compression ratio for K stored at `k_bits` and V at `v_bits`
/// against a `baseline_bits` cache holding equally sized K and V.
pub fn compression_ratio(k_bits: u32, v_bits: u32, baseline_bits: u32) -> Result<CompressionRatio> {
    if k_bits == 0 || v_bits == 0 || baseline_bits == 0 {
        return Err(Error::InvalidArgument(format!(
            "bit widths must be positive, got k={k_bits} v={v_bits} baseline={baseline_bits}"
        )));
    }
    // baseline / ((k + v) / 2) = 2 * baseline / (k + v)
    Ok(CompressionRatio(Ratio::new(
        2 * u64::from(baseline_bits),
        u64::from(k_bits) + u64::from(v_bits),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_ratio() {
        let r = compression_ratio(8, 3, 16).unwrap();
        assert_eq!(r.exact(), Ratio::new(32, 11));
        assert_eq!(r.to_string(), "2.91");
        assert!((r.value() - 2.909_090_909).abs() < 1e-9);
    }

    #[test]
    fn identity_and_other_widths() {
        assert_eq!(
            compression_ratio(16, 16, 16).unwrap().exact(),
            Ratio::from_integer(1)
        );
        assert_eq!(
            compression_ratio(8, 4, 16).unwrap().exact(),
            Ratio::new(8, 3)
        );
        assert_eq!(compression_ratio(8, 4, 16).unwrap().to_string(), "2.67");
    }

    #[test]
    fn rejects_zero_bits() {
        assert!(compression_ratio(0, 3, 16).is_err());
        assert!(compression_ratio(8, 0, 16).is_err());
        assert!(compression_ratio(8, 3, 0).is_err());
    }
}
