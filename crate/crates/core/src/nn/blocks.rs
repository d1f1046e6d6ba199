//! Building blocks of the fusion module.
//!
//! Every block reads its weights from a [`ModelParams`] registry under a
//! dotted prefix, e.g. `lum.fb1.0.msef_b.dw`.

use crate::error::Result;
use crate::nn::exec::Exec;
use crate::nn::model::ModelParams;
use crate::tensor::{Real, Tensor};

fn weight<T: Real, E: Exec<T>>(ex: &mut E, params: &ModelParams<T>, name: &str) -> Result<E::V> {
    Ok(ex.param(name, params.get(name)?))
}

/// `x + DWConv(LN(x)) ⊙ (w ⊙ LN(x))` with `w = tanh(W2 relu(W1 GAP(LN(x))))`.
pub fn msef<T: Real, E: Exec<T>>(
    ex: &mut E,
    params: &ModelParams<T>,
    prefix: &str,
    x: &E::V,
) -> Result<E::V> {
    let scale = weight(ex, params, &format!("{prefix}.ln.scale"))?;
    let shift = weight(ex, params, &format!("{prefix}.ln.shift"))?;
    let k = weight(ex, params, &format!("{prefix}.dw"))?;
    let w1 = weight(ex, params, &format!("{prefix}.w1"))?;
    let w2 = weight(ex, params, &format!("{prefix}.w2"))?;

    let ln = ex.layer_norm(x, &scale, &shift)?;
    let pooled = ex.gap(&ln);
    let h = ex.conv1x1(&pooled, &w1, None)?;
    let h = ex.relu(&h);
    let w = ex.conv1x1(&h, &w2, None)?;
    let w = ex.tanh(&w);
    let z = ex.mul(&ln, &w)?;
    let local = ex.dwconv(&ln, &k)?;
    let gated = ex.mul(&local, &z)?;
    ex.add(x, &gated)
}

/// 3×3 depthwise followed by a biased pointwise convolution.
pub fn dsconv<T: Real, E: Exec<T>>(
    ex: &mut E,
    params: &ModelParams<T>,
    prefix: &str,
    x: &E::V,
) -> Result<E::V> {
    let k = weight(ex, params, &format!("{prefix}.dw"))?;
    let w = weight(ex, params, &format!("{prefix}.pw.w"))?;
    let b = weight(ex, params, &format!("{prefix}.pw.b"))?;
    let d = ex.dwconv(x, &k)?;
    ex.conv1x1(&d, &w, Some(&b))
}

/// `MSEF ∘ ReLU ∘ DSConv ∘ MSEF`, or without the leading MSEF when `simplified`.
pub fn fusion_block<T: Real, E: Exec<T>>(
    ex: &mut E,
    params: &ModelParams<T>,
    prefix: &str,
    x: &E::V,
    simplified: bool,
) -> Result<E::V> {
    let h = if simplified {
        x.clone()
    } else {
        msef(ex, params, &format!("{prefix}.msef_a"), x)?
    };
    let h = dsconv(ex, params, &format!("{prefix}.ds"), &h)?;
    let h = ex.relu(&h);
    msef(ex, params, &format!("{prefix}.msef_b"), &h)
}

/// Component-wise attention: `sigmoid(Conv1x1(DWConv7x7(S)))`, unbiased projection.
pub fn cwa<T: Real, E: Exec<T>>(
    ex: &mut E,
    params: &ModelParams<T>,
    prefix: &str,
    stack: &E::V,
) -> Result<E::V> {
    let k = weight(ex, params, &format!("{prefix}.dw"))?;
    let w = weight(ex, params, &format!("{prefix}.proj.w"))?;
    let d = ex.dwconv(stack, &k)?;
    let a = ex.conv1x1(&d, &w, None)?;
    Ok(ex.sigmoid(&a))
}

/// Structure of one fusion module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionShape {
    pub depth: usize,
    pub simplified: bool,
}

/// Full path: `Conv_out ∘ FB^T(CWA(S) ⊙ FB^T(Conv_in(S)))`.
/// Simplified path: `Conv_out ∘ FB'^T(CWA(S) ⊙ Conv_in(S))`.
pub fn fusion_module<T: Real, E: Exec<T>>(
    ex: &mut E,
    params: &ModelParams<T>,
    prefix: &str,
    stack: &E::V,
    shape: FusionShape,
) -> Result<E::V> {
    let w = weight(ex, params, &format!("{prefix}.in.w"))?;
    let b = weight(ex, params, &format!("{prefix}.in.b"))?;
    let mut feat = ex.conv1x1(stack, &w, Some(&b))?;
    if !shape.simplified {
        for i in 0..shape.depth {
            feat = fusion_block(ex, params, &format!("{prefix}.fb1.{i}"), &feat, false)?;
        }
    }
    let mask = cwa(ex, params, &format!("{prefix}.cwa"), stack)?;
    let mut feat = ex.mul(&mask, &feat)?;
    for i in 0..shape.depth {
        feat = fusion_block(ex, params, &format!("{prefix}.fb2.{i}"), &feat, shape.simplified)?;
    }
    let w = weight(ex, params, &format!("{prefix}.out.w"))?;
    let b = weight(ex, params, &format!("{prefix}.out.b"))?;
    ex.conv1x1(&feat, &w, Some(&b))
}

/// Convenience wrapper evaluating a fusion module eagerly on a plain tensor.
pub fn fusion_module_eager<T: Real>(
    params: &ModelParams<T>,
    prefix: &str,
    stack: &Tensor<T>,
    shape: FusionShape,
) -> Result<Tensor<T>> {
    let mut ex = crate::nn::exec::Eager;
    fusion_module(&mut ex, params, prefix, stack, shape)
}
