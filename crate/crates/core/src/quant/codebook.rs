//! Scalar codebooks and the nearest-centroid coder.

use crate::error::{Error, Result};

/// Identifies the codebook a value block was coded against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodebookId(pub u16);

impl CodebookId {
    /// The fixed 3-bit Lloyd-Max table for N(0, 1).
    pub const GAUSSIAN_3BIT: CodebookId = CodebookId(0);
    /// Codebooks produced by [`lloyd_max_train`](super::lloyd_max_train).
    pub const TRAINED: CodebookId = CodebookId(0xffff);
}

/// MSE-optimal 3-bit centroids for a standard normal source.
pub const GAUSSIAN_3BIT_CENTROIDS: [f32; 8] =
    [-2.152, -1.344, -0.756, -0.245, 0.245, 0.756, 1.344, 2.152];

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    id: CodebookId,
    bits: u8,
    centroids: Vec<f32>,
    /// Decision boundaries, exact in f64 so the coder agrees bit-for-bit with
    /// an argmin over |x - c|.
    midpoints: Vec<f64>,
}

impl Codebook {
    /// `centroids` must be sorted ascending, finite, and have length 2^b with
    /// b in 1..=8.
    pub fn new(id: CodebookId, centroids: Vec<f32>) -> Result<Self> {
        let n = centroids.len();
        if !n.is_power_of_two() || !(2..=256).contains(&n) {
            return Err(Error::InvalidCodebook(format!(
                "{n} centroids is not 2^b for b in 1..=8"
            )));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCodebook("non-finite centroid".into()));
        }
        if centroids.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidCodebook("centroids are not sorted".into()));
        }
        let midpoints = centroids
            .windows(2)
            .map(|w| (f64::from(w[0]) + f64::from(w[1])) / 2.0)
            .collect();
        Ok(Self {
            id,
            bits: n.trailing_zeros() as u8,
            centroids,
            midpoints,
        })
    }

    pub fn gaussian_3bit() -> Self {
        Self::new(CodebookId::GAUSSIAN_3BIT, GAUSSIAN_3BIT_CENTROIDS.to_vec())
            .expect("built-in table is valid")
    }

    pub fn id(&self) -> CodebookId {
        self.id
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    pub fn centroid(&self, index: u8) -> Option<f32> {
        self.centroids.get(usize::from(index)).copied()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.centroids.windows(2).all(|w| w[0] < w[1])
    }

    /// c_i == -c_{n-1-i} for every i.
    pub fn is_symmetric(&self) -> bool {
        let n = self.centroids.len();
        (0..n).all(|i| self.centroids[i] == -self.centroids[n - 1 - i])
    }

    /// Index of the closest centroid. Exact ties go to the smaller index.
    #[inline]
    pub fn nearest(&self, x: f32) -> u8 {
        let x = f64::from(x);
        self.midpoints.partition_point(|&m| m < x) as u8
    }

    /// Mean squared error of this codebook against the given samples.
    pub fn distortion(&self, samples: &[f64]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let total: f64 = samples
            .iter()
            .map(|&x| {
                let c = f64::from(self.centroids[usize::from(self.nearest(x as f32))]);
                (x - c).powi(2)
            })
            .sum();
        total / samples.len() as f64
    }
}

pub fn nearest_centroid(x: f32, codebook: &Codebook) -> u8 {
    codebook.nearest(x)
}

/// Upper bound on per-coordinate MSE for rotation plus b-bit scalar coding:
/// (sqrt(3)·pi/2) · 4^-b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionBound {
    pub bits: u8,
    pub bound: f64,
}

impl DistortionBound {
    pub fn new(bits: u8) -> Self {
        let bound = 3f64.sqrt() * std::f64::consts::PI / 2.0 * 4f64.powi(-i32::from(bits));
        Self { bits, bound }
    }
}
