//! Lloyd-Max scalar quantizer training on an empirical sample.
//!
//! Independent of the fixed table in [`codebook`](super::codebook): it is how
//! that table is checked.

use super::codebook::{Codebook, CodebookId};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LloydMaxOutcome {
    pub codebook: Codebook,
    /// Full-precision centroids; `codebook` holds them rounded to f32.
    pub centroids: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of times an empty cell was reseeded.
    pub empty_cell_repairs: usize,
    /// Training-set MSE of the final centroids.
    pub distortion: f64,
}

/// Alternates boundary (midpoint) and centroid (conditional mean) updates
/// until no centroid moves by `tol` or more, or `max_iters` is reached.
///
/// Needs at least `10 * 2^bits` samples, `bits` in 1..=8. A cell that ends up
/// empty is reseeded at the midpoint of the most populated cell's range.
pub fn lloyd_max_train(
    samples: &[f64],
    bits: u8,
    max_iters: usize,
    tol: f64,
) -> Result<LloydMaxOutcome> {
    if !(1..=8).contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "bits must be in 1..=8, got {bits}"
        )));
    }
    let levels = 1usize << bits;
    let required = 10 * levels;
    if samples.len() < required {
        return Err(Error::TooFewSamples {
            bits,
            required,
            actual: samples.len(),
        });
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample {x}")));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0;
    for &x in &sorted {
        acc += x;
        prefix.push(acc);
    }

    let mut centroids: Vec<f64> = (0..levels)
        .map(|i| sorted[((2 * i + 1) * n / (2 * levels)).min(n - 1)])
        .collect();
    let mut repairs = 0;
    let mut iterations = 0;
    let mut converged = false;
    // ends[i] is one past the last sample of cell i.
    let mut ends = vec![0usize; levels];

    while iterations < max_iters {
        iterations += 1;
        assign_cells(&sorted, &centroids, &mut ends);

        let mut next = vec![0.0; levels];
        let mut empty = Vec::new();
        let mut start = 0;
        for i in 0..levels {
            let end = ends[i];
            if end > start {
                next[i] = (prefix[end] - prefix[start]) / (end - start) as f64;
            } else {
                empty.push(i);
            }
            start = end;
        }
        for &i in &empty {
            repairs += 1;
            let (lo, hi) = most_populated_cell(&ends);
            next[i] = (sorted[lo] + sorted[hi - 1]) / 2.0;
        }
        next.sort_unstable_by(f64::total_cmp);

        let movement = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        centroids = next;
        if movement < tol {
            converged = true;
            break;
        }
    }

    let codebook = Codebook::new(
        CodebookId::TRAINED,
        centroids.iter().map(|&c| c as f32).collect(),
    )?;
    assign_cells(&sorted, &centroids, &mut ends);
    let mut start = 0;
    let mut sq = 0.0;
    for (i, &end) in ends.iter().enumerate() {
        sq += sorted[start..end]
            .iter()
            .map(|x| (x - centroids[i]).powi(2))
            .sum::<f64>();
        start = end;
    }

    Ok(LloydMaxOutcome {
        codebook,
        centroids,
        iterations,
        converged,
        empty_cell_repairs: repairs,
        distortion: sq / n as f64,
    })
}

/// Cell i holds samples in (m_{i-1}, m_i], so a sample on a boundary goes to
/// the lower cell.
fn assign_cells(sorted: &[f64], centroids: &[f64], ends: &mut [usize]) {
    let levels = centroids.len();
    for i in 0..levels - 1 {
        let boundary = (centroids[i] + centroids[i + 1]) / 2.0;
        ends[i] = sorted.partition_point(|&x| x <= boundary);
    }
    ends[levels - 1] = sorted.len();
}

fn most_populated_cell(ends: &[usize]) -> (usize, usize) {
    let mut best = (0, 0);
    let mut start = 0;
    for &end in ends {
        if end - start > best.1 - best.0 {
            best = (start, end);
        }
        start = end;
    }
    best
}
