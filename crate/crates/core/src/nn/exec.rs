//! Execution backends for model and loss graphs.
//!
//! Model, loss and metric code is written once against [`Exec`]. The
//! [`Eager`] backend evaluates immediately and keeps nothing, which is what
//! inference and evaluation use; [`crate::nn::tape::Tape`] records every
//! primitive so gradients can be computed afterwards.

use crate::error::Result;
use crate::nn::ops::{self, Binary, Unary};
use crate::tensor::{Real, Tensor};
use crate::train::loss::FeatureExtractor;

pub trait Exec<T: Real> {
    type V: Clone;

    /// A non-trainable input.
    fn input(&mut self, t: Tensor<T>) -> Self::V;
    /// A named trainable parameter.
    fn param(&mut self, name: &str, t: &Tensor<T>) -> Self::V;
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a Tensor<T>;

    fn conv1x1(&mut self, x: &Self::V, w: &Self::V, b: Option<&Self::V>) -> Result<Self::V>;
    fn dwconv(&mut self, x: &Self::V, k: &Self::V) -> Result<Self::V>;
    fn layer_norm(&mut self, x: &Self::V, scale: &Self::V, shift: &Self::V) -> Result<Self::V>;
    fn gap(&mut self, x: &Self::V) -> Self::V;
    fn unary(&mut self, x: &Self::V, op: Unary) -> Self::V;
    fn binary(&mut self, a: &Self::V, b: &Self::V, op: Binary) -> Result<Self::V>;
    /// `a * x + b` with scalar constants.
    fn affine(&mut self, x: &Self::V, a: T, b: T) -> Self::V;
    /// `max(x, 0)^p`, elementwise.
    fn pow(&mut self, x: &Self::V, p: T) -> Self::V;
    fn clamp(&mut self, x: &Self::V, lo: T, hi: T) -> Self::V;
    fn blur(&mut self, x: &Self::V, taps: &[T]) -> Result<Self::V>;
    fn avg_pool2(&mut self, x: &Self::V) -> Result<Self::V>;
    /// Mean over all elements, as a `1 × 1 × 1` tensor.
    fn mean(&mut self, x: &Self::V) -> Self::V;
    /// Applies a fixed feature extractor, dispatching to the backend's form.
    fn features(&mut self, hook: &dyn FeatureExtractor<T>, x: &Self::V) -> Result<Self::V>;

    fn relu(&mut self, x: &Self::V) -> Self::V {
        self.unary(x, Unary::Relu)
    }
    fn sigmoid(&mut self, x: &Self::V) -> Self::V {
        self.unary(x, Unary::Sigmoid)
    }
    fn tanh(&mut self, x: &Self::V) -> Self::V {
        self.unary(x, Unary::Tanh)
    }
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Add)
    }
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Sub)
    }
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Mul)
    }
    fn div(&mut self, a: &Self::V, b: &Self::V) -> Result<Self::V> {
        self.binary(a, b, Binary::Div)
    }
    /// Scalar value of a `1 × 1 × 1` node.
    fn scalar(&self, v: &Self::V) -> T {
        self.value(v).data()[0]
    }
}

#[inline]
pub(crate) fn pow_pos<T: Real>(v: T, p: T) -> T {
    if v > T::zero() {
        v.powf(p)
    } else {
        T::zero()
    }
}

/// Immediate evaluation without recording.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eager;

impl<T: Real> Exec<T> for Eager {
    type V = Tensor<T>;

    fn input(&mut self, t: Tensor<T>) -> Tensor<T> {
        t
    }
    fn param(&mut self, _name: &str, t: &Tensor<T>) -> Tensor<T> {
        t.clone()
    }
    fn value<'a>(&'a self, v: &'a Tensor<T>) -> &'a Tensor<T> {
        v
    }
    fn conv1x1(&mut self, x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        ops::conv1x1(x, w, b)
    }
    fn dwconv(&mut self, x: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>> {
        ops::dwconv(x, k)
    }
    fn layer_norm(&mut self, x: &Tensor<T>, scale: &Tensor<T>, shift: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(ops::layer_norm(x, scale, shift)?.0)
    }
    fn gap(&mut self, x: &Tensor<T>) -> Tensor<T> {
        ops::gap(x)
    }
    fn unary(&mut self, x: &Tensor<T>, op: Unary) -> Tensor<T> {
        x.map(|v| op.apply(v))
    }
    fn binary(&mut self, a: &Tensor<T>, b: &Tensor<T>, op: Binary) -> Result<Tensor<T>> {
        ops::binary(a, b, op)
    }
    fn affine(&mut self, x: &Tensor<T>, a: T, b: T) -> Tensor<T> {
        x.map(|v| a * v + b)
    }
    fn pow(&mut self, x: &Tensor<T>, p: T) -> Tensor<T> {
        x.map(|v| pow_pos(v, p))
    }
    fn clamp(&mut self, x: &Tensor<T>, lo: T, hi: T) -> Tensor<T> {
        x.clamp(lo, hi)
    }
    fn blur(&mut self, x: &Tensor<T>, taps: &[T]) -> Result<Tensor<T>> {
        ops::blur_valid(x, taps)
    }
    fn avg_pool2(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::avg_pool2(x)
    }
    fn mean(&mut self, x: &Tensor<T>) -> Tensor<T> {
        Tensor::scalar(x.mean())
    }
    fn features(&mut self, hook: &dyn FeatureExtractor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        hook.extract_eager(x)
    }
}
