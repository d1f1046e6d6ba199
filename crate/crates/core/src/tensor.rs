//! Dense `H × W × C` tensors stored row-major with channels innermost.
//!
//! The same carrier holds RGB images, guidance stacks, feature maps and
//! model parameters. Elementwise binary operations broadcast any axis of
//! length one against the other operand, which covers the luminance
//! correction (`H × W × 1`) scaling the reflectance correction
//! (`H × W × 3`) as well as per-channel vectors (`1 × 1 × C`).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts a literal. Every `f64` is representable (possibly rounded).
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Logical `(height, width, channels)` of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Shape produced by broadcasting `self` against `other`, if compatible.
    pub fn broadcast(&self, other: &Shape) -> Option<Shape> {
        fn dim(a: usize, b: usize) -> Option<usize> {
            match (a, b) {
                _ if a == b => Some(a),
                (1, b) => Some(b),
                (a, 1) => Some(a),
                _ => None,
            }
        }
        Some(Shape::new(
            dim(self.height, other.height)?,
            dim(self.width, other.width)?,
            dim(self.channels, other.channels)?,
        ))
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Dense real tensor in `(H, W, C)` row-major order.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Debug> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let preview: Vec<_> = self.data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &preview)
            .finish()
    }
}

impl<T: Real> Tensor<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::full(height, width, channels, T::zero())
    }

    pub fn full(height: usize, width: usize, channels: usize, value: T) -> Self {
        let shape = Shape::new(height, width, channels);
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(height, width, channels);
        if data.len() != shape.len() {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for shape {shape}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn from_shape_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        Self::from_vec(shape.height, shape.width, shape.channels, data)
    }

    /// A `1 × 1 × n` tensor.
    pub fn vector(values: Vec<T>) -> Self {
        let n = values.len();
        Self {
            shape: Shape::new(1, 1, n),
            data: values,
        }
    }

    pub fn scalar(value: T) -> Self {
        Self::vector(vec![value])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let shape = Shape::new(height, width, channels);
        let mut data = Vec::with_capacity(shape.len());
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.shape.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.shape.width
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.shape.channels
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
    pub fn data(&self) -> &[T] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.shape.width + x) * self.shape.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    /// Channel vector of the pixel at `(y, x)`.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let start = self.index(y, x, 0);
        &self.data[start..start + self.shape.channels]
    }

    /// Only the data buffer changes; the logical shape is reinterpreted.
    pub fn reshape(mut self, shape: Shape) -> Result<Self> {
        if shape.len() != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{} into {shape}", self.shape),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(T) -> T) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }

    /// Elementwise combination with broadcasting over unit axes.
    pub fn zip_with(&self, other: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let out_shape = self.shape.broadcast(&other.shape).ok_or_else(|| {
            Error::shape("zip", format!("cannot broadcast {} with {}", self.shape, other.shape))
        })?;
        if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect();
            return Ok(Self {
                shape: out_shape,
                data,
            });
        }
        let sa = BroadcastStrides::new(self.shape, out_shape);
        let sb = BroadcastStrides::new(other.shape, out_shape);
        let mut data = Vec::with_capacity(out_shape.len());
        for y in 0..out_shape.height {
            for x in 0..out_shape.width {
                let ba = sa.base(y, x);
                let bb = sb.base(y, x);
                for c in 0..out_shape.channels {
                    data.push(f(self.data[ba + c * sa.c], other.data[bb + c * sb.c]));
                }
            }
        }
        Ok(Self {
            shape: out_shape,
            data,
        })
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Hadamard product.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn clamp(&self, lo: T, hi: T) -> Self {
        self.map(|v| v.max(lo).min(hi))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        self.sum() / T::from_usize(self.data.len()).unwrap()
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies channel `c` into an `H × W × 1` tensor.
    pub fn channel(&self, c: usize) -> Result<Self> {
        if c >= self.shape.channels {
            return Err(Error::shape(
                "channel",
                format!("index {c} out of range for {} channels", self.shape.channels),
            ));
        }
        let data = self
            .data
            .chunks_exact(self.shape.channels)
            .map(|px| px[c])
            .collect();
        Ok(Self {
            shape: Shape::new(self.shape.height, self.shape.width, 1),
            data,
        })
    }

    /// Selects channels in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.shape.channels) {
            return Err(Error::shape(
                "select_channels",
                format!("index {bad} out of range for {} channels", self.shape.channels),
            ));
        }
        let mut data = Vec::with_capacity(self.shape.pixels() * indices.len());
        for px in self.data.chunks_exact(self.shape.channels.max(1)) {
            data.extend(indices.iter().map(|&i| px[i]));
        }
        Ok(Self {
            shape: Shape::new(self.shape.height, self.shape.width, indices.len()),
            data,
        })
    }

    /// Concatenates tensors of equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_channels", "no inputs"))?;
        let (h, w) = (first.height(), first.width());
        if let Some(p) = parts.iter().find(|p| p.height() != h || p.width() != w) {
            return Err(Error::shape(
                "concat_channels",
                format!("{} vs {}", first.shape, p.shape),
            ));
        }
        let c: usize = parts.iter().map(|p| p.channels()).sum();
        let mut data = Vec::with_capacity(h * w * c);
        for i in 0..h * w {
            for p in parts {
                let pc = p.channels();
                data.extend_from_slice(&p.data[i * pc..(i + 1) * pc]);
            }
        }
        Ok(Self {
            shape: Shape::new(h, w, c),
            data,
        })
    }

    /// Replicates a single channel `n` times.
    pub fn repeat_channels(&self, n: usize) -> Result<Self> {
        if self.shape.channels != 1 {
            return Err(Error::shape(
                "repeat_channels",
                format!("expected 1 channel, got {}", self.shape.channels),
            ));
        }
        let data = self
            .data
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, n))
            .collect();
        Ok(Self {
            shape: Shape::new(self.shape.height, self.shape.width, n),
            data,
        })
    }

    /// Spatial sub-window `[y0, y0+h) × [x0, x0+w)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Self> {
        if y0 + h > self.height() || x0 + w > self.width() {
            return Err(Error::shape(
                "crop",
                format!("{h}x{w} at ({y0},{x0}) exceeds {}", self.shape),
            ));
        }
        let c = self.channels();
        let mut data = Vec::with_capacity(h * w * c);
        for y in y0..y0 + h {
            let start = self.index(y, x0, 0);
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Ok(Self {
            shape: Shape::new(h, w, c),
            data,
        })
    }

    pub fn flip_horizontal(&self) -> Self {
        let (h, w) = (self.height(), self.width());
        Self::from_fn(h, w, self.channels(), |y, x, c| self.get(y, w - 1 - x, c))
    }

    pub fn flip_vertical(&self) -> Self {
        let (h, w) = (self.height(), self.width());
        Self::from_fn(h, w, self.channels(), |y, x, c| self.get(h - 1 - y, x, c))
    }

    /// Rotates by 90° counter-clockwise `quarter_turns` times.
    pub fn rot90(&self, quarter_turns: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..quarter_turns % 4 {
            let (h, w) = (out.height(), out.width());
            out = Self::from_fn(w, h, out.channels(), |y, x, c| out.get(x, w - 1 - y, c));
        }
        out
    }

    pub fn transpose_spatial(&self) -> Self {
        Self::from_fn(self.width(), self.height(), self.channels(), |y, x, c| {
            self.get(x, y, c)
        })
    }

    /// Converts element precision, e.g. to `f64` for verification paths.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64(v.to_f64_lossy()).unwrap_or_else(U::nan))
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Result<T> {
        if self.shape != other.shape {
            return Err(Error::shape(
                "max_abs_diff",
                format!("{} vs {}", self.shape, other.shape),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }
}

/// Strides mapping an output coordinate onto a (possibly broadcast) operand.
#[derive(Clone, Copy)]
pub(crate) struct BroadcastStrides {
    pub y: usize,
    pub x: usize,
    pub c: usize,
}

impl BroadcastStrides {
    pub(crate) fn new(src: Shape, out: Shape) -> Self {
        let c = if src.channels == 1 && out.channels != 1 { 0 } else { 1 };
        let x = if src.width == 1 && out.width != 1 { 0 } else { src.channels };
        let y = if src.height == 1 && out.height != 1 {
            0
        } else {
            src.width * src.channels
        };
        Self { y, x, c }
    }

    #[inline]
    pub(crate) fn base(&self, y: usize, x: usize) -> usize {
        y * self.y + x * self.x
    }
}
