use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{DchError, Result};

/// Coefficients of a P1 function in the nodal basis of one mesh level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalField {
    level: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(level: usize, values: Vec<f64>) -> Self {
        Self { level, values }
    }

    pub fn zeros(level: usize, len: usize) -> Self {
        Self {
            level,
            values: vec![0.0; len],
        }
    }

    pub fn constant(level: usize, len: usize, c: f64) -> Self {
        Self {
            level,
            values: vec![c; len],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn expect_level(&self, level: usize) -> Result<()> {
        if self.level != level {
            return Err(DchError::LevelMismatch {
                expected: level,
                actual: self.level,
            });
        }
        Ok(())
    }

    pub fn expect_len(&self, len: usize) -> Result<()> {
        if self.values.len() != len {
            return Err(DchError::LengthMismatch {
                expected: len,
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        assert_eq!(self.values.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn shift(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Deref for NodalField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Euclidean inner product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
