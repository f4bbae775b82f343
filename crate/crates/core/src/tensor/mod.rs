//! Dense `(channels, height, width)` feature maps and the layer primitives
//! the detection graph is built from.
//!
//! Storage is channel-major: each channel is a contiguous row-major plane, the
//! same ordering darknet weight files use, so parameters load by straight copy.

mod conv;
mod ops;

use std::fmt;
use std::ops::Range;

pub use conv::{apply_batchnorm, conv2d, conv2d_with_scratch, BatchNorm, ConvParams};
pub use ops::{add, concat_channels, leaky_relu, leaky_relu_in_place, upsample_nearest};

/// Default negative slope for leaky activations.
pub const DEFAULT_LEAKY_SLOPE: f32 = 0.1;
/// Default batch-norm epsilon.
pub const DEFAULT_BN_EPSILON: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Shape violation raised by a primitive. The engine attaches the layer index.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{op}: expected {expected}, got {actual}")]
pub struct ShapeError {
    pub op: &'static str,
    pub expected: String,
    pub actual: String,
}

impl ShapeError {
    pub(crate) fn new(op: &'static str, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        Self {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self, ShapeError> {
        if shape.is_empty() {
            return Err(ShapeError::new("tensor", "positive dimensions", shape));
        }
        if data.len() != shape.len() {
            return Err(ShapeError::new(
                "tensor",
                format!("{} values for {shape}", shape.len()),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f32) -> Self {
        assert!(!shape.is_empty(), "tensor dimensions must be positive");
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut t = Self::zeros(shape);
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    t.data[(c * shape.height + y) * shape.width + x] = f(c, y, x);
                }
            }
        }
        t
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.shape.channels && y < self.shape.height && x < self.shape.width);
        (c * self.shape.height + y) * self.shape.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.shape.plane();
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Copies out a contiguous range of channels.
    pub fn slice_channels(&self, range: Range<usize>) -> Result<Tensor, ShapeError> {
        if range.start >= range.end || range.end > self.shape.channels {
            return Err(ShapeError::new(
                "slice_channels",
                format!("non-empty range within 0..{}", self.shape.channels),
                format!("{range:?}"),
            ));
        }
        let plane = self.shape.plane();
        let shape = Shape::new(range.len(), self.shape.height, self.shape.width);
        Tensor::new(shape, self.data[range.start * plane..range.end * plane].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
