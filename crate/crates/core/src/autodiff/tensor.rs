use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major array with an attached gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<R = f64> {
    shape: Vec<usize>,
    values: Vec<R>,
    grad: Vec<R>,
    requires_grad: bool,
}

impl<R: Real> Tensor<R> {
    pub fn new(shape: &[usize], values: Vec<R>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("tensor shape {shape:?} must be non-empty with positive dims")));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::shape("tensor", shape, &[values.len()]));
        }
        Ok(Self {
            shape: shape.to_vec(),
            grad: vec![R::zero(); n],
            values,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![R::zero(); n]).expect("valid zeros shape")
    }

    pub fn filled(shape: &[usize], v: R) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![v; n]).expect("valid fill shape")
    }

    pub fn scalar(v: R) -> Self {
        Self::new(&[1], vec![v]).expect("scalar shape")
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(&[rows.len(), cols], rows.concat())
    }

    pub fn with_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    pub fn grad(&self) -> &[R] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [R] {
        &mut self.grad
    }

    /// Values and gradient borrowed together, for optimizer updates.
    pub fn split_mut(&mut self) -> (&mut [R], &[R]) {
        (&mut self.values, &self.grad)
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = R::zero());
    }

    pub fn into_values(self) -> Vec<R> {
        self.values
    }

    /// Same data under a new shape with equal element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.values.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Index of the first NaN/Inf in values or gradient, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values
            .iter()
            .chain(self.grad.iter())
            .position(|v| !v.is_finite())
            .map(|i| i % self.values.len())
    }

    pub fn get(&self, idx: &[usize]) -> R {
        self.values[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub(crate) fn reset_grad_storage(&mut self) {
        if self.grad.len() != self.values.len() {
            self.grad = vec![R::zero(); self.values.len()];
        } else {
            self.zero_grad();
        }
    }

    pub(crate) fn take_grad(&mut self) -> Vec<R> {
        std::mem::take(&mut self.grad)
    }

    pub(crate) fn put_grad(&mut self, g: Vec<R>) {
        self.grad = g;
    }
}
