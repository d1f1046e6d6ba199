//! Hybrid training loss: `λ_MSE·MSE + λ_MS-SSIM·(1 − MS-SSIM) + λ_Perc·Perc`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{max_scales, ms_ssim_graph};
use crate::nn::exec::{Eager, Exec};
use crate::nn::tape::{Tape, Var};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub mse: f64,
    pub msssim: f64,
    pub perc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            mse: 1.0,
            msssim: 0.2,
            perc: 0.01,
        }
    }
}

/// A fixed, non-trainable image-to-feature map used by the perceptual term.
///
/// Implementations provide the same function for both backends: an eager
/// form and a recorded form whose operations are differentiable with
/// respect to the input image. Any weights are constants, not parameters.
pub trait FeatureExtractor<T: Real>: Send + Sync {
    fn extract_eager(&self, x: &Tensor<T>) -> Result<Tensor<T>>;
    fn extract_tape(&self, tape: &mut Tape<T>, x: &Var) -> Result<Var>;
}

/// `relu(W x)` with a fixed pointwise projection `W` of shape `(out, in, 1)`.
#[derive(Debug, Clone)]
pub struct ProjectionFeatures<T> {
    pub weight: Tensor<T>,
}

impl<T: Real> ProjectionFeatures<T> {
    fn apply<E: Exec<T>>(&self, ex: &mut E, x: &E::V) -> Result<E::V> {
        let w = ex.input(self.weight.clone());
        let h = ex.conv1x1(x, &w, None)?;
        Ok(ex.relu(&h))
    }
}

impl<T: Real> FeatureExtractor<T> for ProjectionFeatures<T> {
    fn extract_eager(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.apply(&mut Eager, x)
    }

    fn extract_tape(&self, tape: &mut Tape<T>, x: &Var) -> Result<Var> {
        self.apply(tape, x)
    }
}

/// Loss node plus the raw (unweighted) component values.
#[derive(Debug, Clone)]
pub struct LossGraph<V> {
    pub total: V,
    pub mse: f64,
    /// `1 − MS-SSIM`; zero when the image is smaller than one SSIM window.
    pub msssim: f64,
    /// Zero when no feature extractor is supplied.
    pub perc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossValue {
    pub total: f64,
    pub mse: f64,
    pub msssim: f64,
    pub perc: f64,
}

fn mean_sq_diff<T: Real, E: Exec<T>>(ex: &mut E, a: &E::V, b: &E::V) -> Result<E::V> {
    let d = ex.sub(a, b)?;
    let sq = ex.mul(&d, &d)?;
    Ok(ex.mean(&sq))
}

/// Records the hybrid loss. MS-SSIM uses the largest scale count (≤ 5)
/// the patch supports.
pub fn loss_graph<T: Real, E: Exec<T>>(
    ex: &mut E,
    pred: &E::V,
    gt: &E::V,
    weights: &LossWeights,
    hook: Option<&dyn FeatureExtractor<T>>,
) -> Result<LossGraph<E::V>> {
    let (ps, gs) = (ex.value(pred).shape(), ex.value(gt).shape());
    if ps != gs || ps.channels != 3 {
        return Err(Error::shape("loss_hybrid", format!("{ps} vs {gs}, RGB required")));
    }
    let mse = mean_sq_diff(ex, pred, gt)?;
    let mse_v = ex.scalar(&mse).to_f64_lossy();
    let mut total = ex.affine(&mse, T::lit(weights.mse), T::zero());

    let mut msssim_v = 0.0;
    let scales = max_scales(ps.height, ps.width);
    if scales > 0 {
        let ms = ms_ssim_graph(ex, pred, gt, scales)?;
        let l = ex.affine(&ms, -T::one(), T::one());
        msssim_v = ex.scalar(&l).to_f64_lossy();
        let term = ex.affine(&l, T::lit(weights.msssim), T::zero());
        total = ex.add(&total, &term)?;
    }

    let mut perc_v = 0.0;
    if let Some(hook) = hook {
        let fp = ex.features(hook, pred)?;
        let fg = ex.features(hook, gt)?;
        let p = mean_sq_diff(ex, &fp, &fg)?;
        perc_v = ex.scalar(&p).to_f64_lossy();
        let term = ex.affine(&p, T::lit(weights.perc), T::zero());
        total = ex.add(&total, &term)?;
    }

    Ok(LossGraph {
        total,
        mse: mse_v,
        msssim: msssim_v,
        perc: perc_v,
    })
}

pub fn loss_hybrid<T: Real>(
    pred: &Tensor<T>,
    gt: &Tensor<T>,
    weights: &LossWeights,
    hook: Option<&dyn FeatureExtractor<T>>,
) -> Result<LossValue> {
    let mut ex = Eager;
    let g = loss_graph(&mut ex, pred, gt, weights, hook)?;
    Ok(LossValue {
        total: g.total.data()[0].to_f64_lossy(),
        mse: g.mse,
        msssim: g.msssim,
        perc: g.perc,
    })
}
