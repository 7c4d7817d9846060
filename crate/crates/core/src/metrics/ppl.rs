use std::fmt;

use crate::error::{Error, Result};

/// Relative perplexity change of a compressed cache against its baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PplDelta {
    pub baseline_ppl: f64,
    pub compressed_ppl: f64,
    pub delta_percent: f64,
}

impl fmt::Display for PplDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.2}%", self.delta_percent)
    }
}

/// (compressed - baseline) / baseline · 100.
pub fn ppl_delta(baseline: f64, compressed: f64) -> Result<PplDelta> {
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "baseline perplexity must be positive, got {baseline}"
        )));
    }
    if !compressed.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "compressed perplexity must be finite, got {compressed}"
        )));
    }
    Ok(PplDelta {
        baseline_ppl: baseline,
        compressed_ppl: compressed,
        delta_percent: (compressed - baseline) / baseline * 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pairs() {
        assert_eq!(ppl_delta(8.998, 9.141).unwrap().to_string(), "+1.59%");
        assert_eq!(ppl_delta(10.369, 10.342).unwrap().to_string(), "-0.26%");
        assert_eq!(ppl_delta(9.665, 9.720).unwrap().to_string(), "+0.57%");
    }

    #[test]
    fn equal_perplexities() {
        assert_eq!(ppl_delta(7.5, 7.5).unwrap().delta_percent, 0.0);
    }

    #[test]
    fn rejects_non_positive_baseline() {
        assert!(ppl_delta(0.0, 1.0).is_err());
        assert!(ppl_delta(-1.0, 1.0).is_err());
        assert!(ppl_delta(f64::NAN, 1.0).is_err());
    }
}
