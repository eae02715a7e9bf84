//! Single-channel row-major raster, the working currency of the display chain.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Single-channel 2-D raster stored row-major with a top-left origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Raster<T> {
    /// All-zero raster of the given size.
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        Self {
            width,
            height,
            data: vec![T::zero(); width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "raster data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [T] {
        &mut self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_value(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    pub fn min_value(&self) -> T {
        self.data.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn same_size<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_size(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> Raster<T> {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}
