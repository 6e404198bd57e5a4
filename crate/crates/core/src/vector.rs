//! Flat parameter vectors and the arithmetic the optimizers need.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{CoreError, Result};

/// A flat, fixed-dimension vector of model parameters.
///
/// The dimension is set at construction and never changes. Construction
/// through [`ParameterVector::new`] rejects non-finite entries; the
/// optimizers guard against divergence separately so that intermediate
/// arithmetic stays cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    /// Builds a vector from raw values, rejecting NaN/Inf entries and
    /// zero dimension.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::InvalidArgument(
                "parameter vector must have positive dimension".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NumericalFailure {
                context: "parameter vector construction",
                coordinate: Some(i),
            });
        }
        Ok(Self { values })
    }

    /// All-zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry; 0 for the zero vector.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// In-place `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Errors unless `other` has the same dimension as `self`.
    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for ParameterVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let err = ParameterVector::new(vec![1.0, f64::NAN]).unwrap_err();
        match err {
            CoreError::NumericalFailure { coordinate, .. } => assert_eq!(coordinate, Some(1)),
            other => panic!("unexpected error: {other:?}"),
        }
        assert!(ParameterVector::new(vec![]).is_err());
    }

    #[test]
    fn norm_and_dot() {
        let v = ParameterVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.norm(), 5.0);
        let w = ParameterVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(v.dot(&w), 11.0);
    }

    #[test]
    fn add_scaled_in_place() {
        let mut v = ParameterVector::new(vec![1.0, 2.0]).unwrap();
        let w = ParameterVector::new(vec![10.0, -10.0]).unwrap();
        v.add_scaled(0.5, &w);
        assert_eq!(v.as_slice(), &[6.0, -3.0]);
    }
}
