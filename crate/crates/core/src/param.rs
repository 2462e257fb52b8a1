//! Parameter vectors and the compact parameter box they live in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the parameter space. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ParamError> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ParamError::NonFinite {
                index: i,
                value: *v,
            });
        }
        Ok(ParamVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, ParamError> {
        Self::new(values.to_vec())
    }

    /// Scalar convenience for the toy models.
    pub fn scalar(value: f64) -> Result<Self, ParamError> {
        Self::new(vec![value])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `max_i |self_i - other_i|`; panics on length mismatch.
    pub fn inf_distance(&self, other: &ParamVector) -> f64 {
        assert_eq!(self.len(), other.len(), "dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

/// Componentwise box bounds defining the compact parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoundsError> {
        if lower.len() != upper.len() {
            return Err(BoundsError::LengthMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(BoundsError::InvalidInterval {
                    index: i,
                    lower: *lo,
                    upper: *hi,
                });
            }
        }
        Ok(DomainBounds { lower, upper })
    }

    /// The box `[-half_width, half_width]^p`.
    pub fn symmetric(p: usize, half_width: f64) -> Self {
        DomainBounds::new(vec![-half_width; p], vec![half_width; p])
            .expect("half_width must be positive and finite")
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &ParamVector) -> bool {
        theta.len() == self.dimension()
            && theta
                .values()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn contains_strictly(&self, theta: &ParamVector) -> bool {
        theta.len() == self.dimension()
            && theta
                .values()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v > lo && v < hi)
    }
}

/// Componentwise clamp of `theta` into `bounds`; the flag reports whether
/// any component moved. In-box vectors are exactly the fixed points.
pub fn project_to_domain(theta: &ParamVector, bounds: &DomainBounds) -> (ParamVector, bool) {
    assert_eq!(theta.len(), bounds.dimension(), "dimension mismatch");
    let mut clamped = false;
    let values = theta
        .values()
        .iter()
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|(v, (lo, hi))| {
            let w = v.clamp(*lo, *hi);
            if w != *v {
                clamped = true;
            }
            w
        })
        .collect();
    (
        ParamVector::new(values).expect("clamped values are finite"),
        clamped,
    )
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("bounds lengths differ: lower has {lower}, upper has {upper}")]
    LengthMismatch { lower: usize, upper: usize },
    #[error("bounds component {index} is not a valid interval: [{lower}, {upper}]")]
    InvalidInterval { index: usize, lower: f64, upper: f64 },
}
