//! Dense coordinate vectors carrying iterates, anchors and gradients.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, Range};

use crate::error::CoreError;

/// Dense real vector with a fixed dimension.
///
/// Successful constructors and operations keep every entry finite; inputs
/// containing NaN or infinities are rejected at the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// Wraps raw values, rejecting non-finite entries and zero dimension.
    pub fn new(values: Vec<f64>) -> Result<Self, CoreError> {
        if values.is_empty() {
            return Err(CoreError::input("vector dimension must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::input(alloc::format!(
                "non-finite entry at coordinate {i}"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self, CoreError> {
        Self::new(vec![value; dim])
    }

    /// Standard basis vector `e_index`.
    pub fn basis(dim: usize, index: usize, scale: f64) -> Result<Self, CoreError> {
        if index >= dim {
            return Err(CoreError::input("basis index out of range"));
        }
        let mut values = vec![0.0; dim];
        values[index] = scale;
        Self::new(values)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let sq: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        libm::sqrt(sq)
    }

    /// Norm restricted to a coordinate range.
    pub fn norm_range(&self, range: Range<usize>) -> f64 {
        libm::sqrt(self.values[range].iter().map(|v| v * v).sum())
    }

    /// Distance restricted to a coordinate range.
    pub fn distance_range(&self, other: &Self, range: Range<usize>) -> f64 {
        let sq: f64 = self.values[range.clone()]
            .iter()
            .zip(other.values[range].iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        libm::sqrt(sq)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += alpha * b;
        }
    }

    /// `self = (1 − c) * self + c * other`.
    pub fn lerp(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a = (1.0 - c) * *a + c * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values.iter_mut() {
            *v *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
        assert!(ParamVector::new(vec![]).is_err());
        assert!(ParamVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn norms_and_distances() {
        let a = ParamVector::new(vec![3.0, 4.0]).unwrap();
        let b = ParamVector::zeros(2);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.distance(&b), 5.0);
        assert_eq!(a.norm_range(0..1), 3.0);
        assert_eq!(a.distance_range(&b, 1..2), 4.0);
    }

    #[test]
    fn axpy_and_lerp() {
        let mut a = ParamVector::new(vec![1.0, 2.0]).unwrap();
        let g = ParamVector::new(vec![10.0, -10.0]).unwrap();
        a.axpy(-0.1, &g);
        assert_eq!(a.as_slice(), &[0.0, 3.0]);
        let mut p = ParamVector::zeros(2);
        p.lerp(0.25, &ParamVector::constant(2, 4.0).unwrap());
        assert_eq!(p.as_slice(), &[1.0, 1.0]);
    }
}
