use serde::{Deserialize, Serialize};

use crate::error::{Result, VgdError};

/// Tolerance on the L2 norm for a vector to count as unit length.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// A dense embedding produced by an alignment encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(VgdError::InvalidInput("embedding must have dim >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VgdError::InvalidInput(
                "embedding contains non-finite values".into(),
            ));
        }
        Ok(Self(values))
    }

    /// Builds a unit-length copy of `values`.
    pub fn normalized_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)?.normalized()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(VgdError::DegenerateEmbedding);
        }
        Ok(Self(self.0.iter().map(|v| v / norm).collect()))
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_dim(other.dim())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(VgdError::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}
