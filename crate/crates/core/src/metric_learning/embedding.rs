//! Embedding vectors and trainable class centers.

use super::MetricError;
use crate::rng::RngStream;

/// Unit-length tolerance for embeddings flagged as normalized.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Default embedding dimension.
pub const EMBED_DIM: usize = 512;

/// A feature vector, either raw encoder output or L2-normalized onto the
/// unit hypersphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    normalized: bool,
}

impl Embedding {
    /// Wrap raw (unnormalized) features.
    pub fn raw(values: Vec<f64>) -> Self {
        Embedding {
            values,
            normalized: false,
        }
    }

    /// Project onto the unit sphere.
    pub fn unit(values: Vec<f64>) -> Result<Self, MetricError> {
        let values = l2_normalize(&values)?;
        Ok(Embedding {
            values,
            normalized: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Verify the unit-sphere invariant, within `UNIT_TOLERANCE`.
    pub fn check_unit(&self) -> Result<(), MetricError> {
        let norm = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !self.normalized || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(MetricError::UnnormalizedEmbedding { norm });
        }
        Ok(())
    }
}

/// Squared Euclidean distance between two equal-length vectors.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// L2-normalize a vector; errors on zero or non-finite norm.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>, MetricError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(MetricError::ZeroNorm { norm });
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// One trainable center vector per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCenters {
    centers: Vec<Vec<f64>>,
}

impl ClassCenters {
    /// Initialize with i.i.d. zero-mean Gaussians, σ = 0.01.
    pub fn init(num_classes: usize, dim: usize, rng: &mut RngStream) -> Self {
        let centers = (0..num_classes)
            .map(|_| (0..dim).map(|_| 0.01 * rng.normal()).collect())
            .collect();
        ClassCenters { centers }
    }

    pub fn from_rows(centers: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        if let Some(first) = centers.first() {
            let dim = first.len();
            for c in &centers {
                if c.len() != dim {
                    return Err(MetricError::DimensionMismatch {
                        what: "class center",
                        expected: dim,
                        found: c.len(),
                    });
                }
            }
        }
        Ok(ClassCenters { centers })
    }

    pub fn num_classes(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn center(&self, class: usize) -> &[f64] {
        &self.centers[class]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.centers
    }
}
