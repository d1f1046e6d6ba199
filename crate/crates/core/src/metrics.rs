//! Full-reference quality metrics.
//!
//! SSIM and MS-SSIM are computed on the Rec.709 luma of RGB inputs with an
//! 11-tap Gaussian window (σ = 1.5) and valid borders. The graph versions
//! run on any [`Exec`] backend, so the training loss and the reported
//! metric share one implementation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::guidance::REC709;
use crate::nn::exec::{Eager, Exec};
use crate::nn::ops::gaussian_kernel;
use crate::tensor::{Real, Tensor};

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const PSNR_CAP: f64 = 100.0;

/// Smallest side length that supports `scales` MS-SSIM scales.
pub fn min_size(scales: usize) -> usize {
    WINDOW << scales.saturating_sub(1)
}

/// Largest scale count `≤ 5` that fits an `h × w` image (0 below the window size).
pub fn max_scales(h: usize, w: usize) -> usize {
    (1..=MS_SSIM_WEIGHTS.len())
        .rev()
        .find(|&m| h.min(w) >= min_size(m))
        .unwrap_or(0)
}

/// Scale weights for `m` scales, renormalized to sum to one when `m < 5`.
pub fn scale_weights(m: usize) -> Vec<f64> {
    let w = &MS_SSIM_WEIGHTS[..m];
    if m == MS_SSIM_WEIGHTS.len() {
        return w.to_vec();
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Rec.709 luma of an RGB node; one-channel nodes pass through.
pub fn luma<T: Real, E: Exec<T>>(ex: &mut E, x: &E::V) -> Result<E::V> {
    match ex.value(x).channels() {
        1 => Ok(x.clone()),
        3 => {
            let w = ex.input(Tensor::from_vec(1, 3, 1, REC709.iter().map(|&c| T::lit(c)).collect())?);
            ex.conv1x1(x, &w, None)
        }
        c => Err(Error::shape("luma", format!("expected 1 or 3 channels, got {c}"))),
    }
}

/// Mean SSIM and mean contrast-structure term of two one-channel nodes.
fn ssim_cs<T: Real, E: Exec<T>>(ex: &mut E, x: &E::V, y: &E::V, taps: &[T]) -> Result<(E::V, E::V)> {
    let mx = ex.blur(x, taps)?;
    let my = ex.blur(y, taps)?;
    let xx = ex.mul(x, x)?;
    let yy = ex.mul(y, y)?;
    let xy = ex.mul(x, y)?;
    let exx = ex.blur(&xx, taps)?;
    let eyy = ex.blur(&yy, taps)?;
    let exy = ex.blur(&xy, taps)?;
    let mxx = ex.mul(&mx, &mx)?;
    let myy = ex.mul(&my, &my)?;
    let mxy = ex.mul(&mx, &my)?;
    let vx = ex.sub(&exx, &mxx)?;
    let vy = ex.sub(&eyy, &myy)?;
    let cov = ex.sub(&exy, &mxy)?;

    let (c1, c2) = (T::lit(C1), T::lit(C2));
    let two = T::lit(2.0);
    let cs_num = ex.affine(&cov, two, c2);
    let v_sum = ex.add(&vx, &vy)?;
    let cs_den = ex.affine(&v_sum, T::one(), c2);
    let cs = ex.div(&cs_num, &cs_den)?;
    let l_num = ex.affine(&mxy, two, c1);
    let m_sum = ex.add(&mxx, &myy)?;
    let l_den = ex.affine(&m_sum, T::one(), c1);
    let l = ex.div(&l_num, &l_den)?;
    let s = ex.mul(&l, &cs)?;
    Ok((ex.mean(&s), ex.mean(&cs)))
}

fn check_pair<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{} vs {}", a.shape(), b.shape())));
    }
    Ok(())
}

fn check_size<T: Real>(op: &'static str, t: &Tensor<T>, scales: usize) -> Result<()> {
    let need = min_size(scales);
    if t.height().min(t.width()) < need {
        return Err(Error::shape(
            op,
            format!(
                "image {} too small for {scales} scale(s): minimum side is {need} pixels",
                t.shape()
            ),
        ));
    }
    Ok(())
}

/// Single-scale SSIM node.
pub fn ssim_graph<T: Real, E: Exec<T>>(ex: &mut E, pred: &E::V, gt: &E::V) -> Result<E::V> {
    check_pair("ssim", ex.value(pred), ex.value(gt))?;
    check_size("ssim", ex.value(pred), 1)?;
    let taps = gaussian_kernel::<T>(WINDOW, SIGMA);
    let x = luma(ex, pred)?;
    let y = luma(ex, gt)?;
    Ok(ssim_cs(ex, &x, &y, &taps)?.0)
}

/// `Π_{m<M} relu(cs_m)^{w_m} · relu(ssim_M)^{w_M}` with 2×2 average pooling
/// between scales.
pub fn ms_ssim_graph<T: Real, E: Exec<T>>(ex: &mut E, pred: &E::V, gt: &E::V, scales: usize) -> Result<E::V> {
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() {
        return Err(Error::Config(format!("MS-SSIM scales must be in 1..=5, got {scales}")));
    }
    check_pair("ms_ssim", ex.value(pred), ex.value(gt))?;
    check_size("ms_ssim", ex.value(pred), scales)?;
    let taps = gaussian_kernel::<T>(WINDOW, SIGMA);
    let weights = scale_weights(scales);
    let mut x = luma(ex, pred)?;
    let mut y = luma(ex, gt)?;
    let mut prod: Option<E::V> = None;
    for (m, &w) in weights.iter().enumerate() {
        let (s, cs) = ssim_cs(ex, &x, &y, &taps)?;
        let term = if m + 1 == scales { s } else { cs };
        let f = ex.pow(&term, T::lit(w));
        prod = Some(match prod {
            None => f,
            Some(p) => ex.mul(&p, &f)?,
        });
        if m + 1 < scales {
            x = ex.avg_pool2(&x)?;
            y = ex.avg_pool2(&y)?;
        }
    }
    Ok(prod.expect("at least one scale"))
}

pub fn ssim<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<T> {
    let mut ex = Eager;
    let (p, g) = (pred.clone(), gt.clone());
    Ok(ssim_graph(&mut ex, &p, &g)?.data()[0])
}

pub fn ms_ssim<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>, scales: usize) -> Result<T> {
    let mut ex = Eager;
    let (p, g) = (pred.clone(), gt.clone());
    Ok(ms_ssim_graph(&mut ex, &p, &g, scales)?.data()[0])
}

/// `10 log10(1 / MSE)`, capped at 100 dB.
pub fn psnr<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<f64> {
    check_pair("psnr", pred, gt)?;
    let n = pred.len().max(1) as f64;
    let mse = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| {
            let d = a.to_f64_lossy() - b.to_f64_lossy();
            d * d
        })
        .sum::<f64>()
        / n;
    if mse < 1e-10 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gray_mean<T: Real>(t: &Tensor<T>) -> Result<f64> {
    if t.channels() != 3 {
        return Err(Error::shape("gt_mean_rescale", format!("expected RGB, got {}", t.shape())));
    }
    let n = t.shape().pixels().max(1) as f64;
    Ok(t.data()
        .chunks_exact(3)
        .map(|p| REC709[0] * p[0].to_f64_lossy() + REC709[1] * p[1].to_f64_lossy() + REC709[2] * p[2].to_f64_lossy())
        .sum::<f64>()
        / n)
}

/// Scales `pred` so its mean luma matches `gt`; returns the clamped result and `q`.
pub fn gt_mean_rescale<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<(Tensor<T>, f64)> {
    check_pair("gt_mean_rescale", pred, gt)?;
    let mp = gray_mean(pred)?;
    if mp <= 0.0 {
        return Err(Error::Numerical("prediction has zero mean luma".into()));
    }
    let q = gray_mean(gt)? / mp;
    Ok((pred.map(|v| T::lit(q * v.to_f64_lossy()).max(T::zero()).min(T::one())), q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub msssim: f64,
    pub gt_mean_applied: bool,
    pub q: Option<f64>,
}

/// PSNR, SSIM and MS-SSIM in `f64`. MS-SSIM uses as many scales as the
/// image supports, up to five.
pub fn evaluate<T: Real>(pred: &Tensor<T>, gt: &Tensor<T>, gt_mean: bool) -> Result<MetricReport> {
    check_pair("evaluate", pred, gt)?;
    let gt64 = gt.cast::<f64>();
    let (pred64, q) = if gt_mean {
        let (p, q) = gt_mean_rescale(&pred.cast::<f64>(), &gt64)?;
        (p, Some(q))
    } else {
        (pred.cast::<f64>(), None)
    };
    let scales = max_scales(pred.height(), pred.width());
    if scales == 0 {
        return Err(Error::shape(
            "evaluate",
            format!("image {} smaller than the {WINDOW}-pixel SSIM window", pred.shape()),
        ));
    }
    Ok(MetricReport {
        psnr: psnr(&pred64, &gt64)?,
        ssim: ssim(&pred64, &gt64)?,
        msssim: ms_ssim(&pred64, &gt64, scales)?,
        gt_mean_applied: gt_mean,
        q,
    })
}
