//! Row-major n-dimensional tensor.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || data.len() != expect {
            return Err(Error::shape(
                "tensor construction",
                format!("{shape:?} = {expect} values"),
                data.len().to_string(),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Self { shape: vec![data.len()], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Same data viewed under a new shape of equal volume.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise product, used for `a_i * vjp` contractions.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "hadamard",
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    /// Splits into positive and negative parts: `x = pos + neg`,
    /// `pos >= 0`, `neg <= 0`.
    pub fn split_signs(&self) -> (Self, Self) {
        let pos = self.map(|v| if v > T::zero() { v } else { T::zero() });
        let neg = self.map(|v| if v < T::zero() { v } else { T::zero() });
        (pos, neg)
    }

    pub fn sum(&self) -> T {
        crate::util::pairwise_sum(&self.data)
    }
}
