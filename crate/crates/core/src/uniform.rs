//! Probability-integral-transform sequences.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Values closer than this to 0 or 1 are pulled inside the open unit interval.
pub const CLAMP_EPS: f64 = 1e-12;

/// An ordered sequence of generalized residuals, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UniformSequence {
    values: Vec<f64>,
}

impl UniformSequence {
    /// Builds a sequence, clamping every value into `[CLAMP_EPS, 1 - CLAMP_EPS]`.
    ///
    /// Values outside `[0, 1]` or non-finite values are rejected; the
    /// length must be at least 2.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::DegenerateSample(format!(
                "need at least 2 values, got {}",
                values.len()
            )));
        }
        let mut values = values;
        for v in values.iter_mut() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "uniform value {v} outside [0, 1]"
                )));
            }
            *v = clamp_unit(*v);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for UniformSequence {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[inline]
pub fn clamp_unit(v: f64) -> f64 {
    v.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
}
