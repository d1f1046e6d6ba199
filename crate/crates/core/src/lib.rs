//! Multi-prior residual Retinex enhancement for low-light images.
//!
//! An input image `I` is described by two analytic guidance stacks, a
//! luminance stack `S_L` and a reflectance stack `S_R`. Two small fusion
//! networks map them to a one-channel gain `Δ_L` and a three-channel
//! correction `Δ_R`, and the output is `clamp(I + Δ_L ⊙ Δ_R)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Real, Shape, Tensor};
