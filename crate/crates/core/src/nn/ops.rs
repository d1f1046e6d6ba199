//! Forward and backward kernels for the fixed operator set.
//!
//! Convolutions use stride 1 and zero "same" padding. Kernel tensors are
//! stored as:
//!
//! * 1×1 convolution weight: `(out, in, 1)`, bias `(1, 1, out)`
//! * depthwise kernel: `(kh, kw, channels)`
//!
//! Backward kernels take the upstream gradient `gy` and return gradients
//! for each input in the same order as the forward arguments.

use crate::error::{Error, Result};
use crate::tensor::{BroadcastStrides, Real, Shape, Tensor};

/// Variance floor of layer normalization.
pub const LN_EPS: f64 = 1e-5;

pub fn conv1x1<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let (cout, cin) = (w.height(), w.width());
    if w.channels() != 1 || x.channels() != cin {
        return Err(Error::shape(
            "conv1x1",
            format!("input {} against weight {}", x.shape(), w.shape()),
        ));
    }
    if let Some(b) = b {
        if b.len() != cout {
            return Err(Error::shape("conv1x1", format!("bias {} for {cout} outputs", b.shape())));
        }
    }
    // transposed weights let the inner loop run over contiguous outputs
    let wd = w.data();
    let mut wt = vec![T::zero(); cin * cout];
    for o in 0..cout {
        for i in 0..cin {
            wt[i * cout + o] = wd[o * cin + i];
        }
    }
    let init: Vec<T> = b.map_or_else(|| vec![T::zero(); cout], |b| b.data().to_vec());
    let mut out = vec![T::zero(); x.shape().pixels() * cout];
    for (px, o) in x.data().chunks_exact(cin).zip(out.chunks_exact_mut(cout)) {
        o.copy_from_slice(&init);
        for (xi, wrow) in px.iter().zip(wt.chunks_exact(cout)) {
            for (oi, wi) in o.iter_mut().zip(wrow) {
                *oi += *wi * *xi;
            }
        }
    }
    Tensor::from_vec(x.height(), x.width(), cout, out)
}

/// Returns `(gx, gw, gb)`; `gx` is skipped when `need_x` is false.
pub fn conv1x1_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    gy: &Tensor<T>,
    need_x: bool,
) -> (Option<Tensor<T>>, Tensor<T>, Tensor<T>) {
    let (cout, cin) = (w.height(), w.width());
    let wd = w.data();
    let mut gw = vec![T::zero(); cout * cin];
    let mut gb = vec![T::zero(); cout];
    let mut gx = if need_x { vec![T::zero(); x.len()] } else { Vec::new() };
    for (p, (px, g)) in x
        .data()
        .chunks_exact(cin)
        .zip(gy.data().chunks_exact(cout))
        .enumerate()
    {
        for o in 0..cout {
            let go = g[o];
            gb[o] += go;
            for (gwi, xi) in gw[o * cin..(o + 1) * cin].iter_mut().zip(px) {
                *gwi += go * *xi;
            }
            if need_x {
                for (gxi, wi) in gx[p * cin..(p + 1) * cin].iter_mut().zip(&wd[o * cin..(o + 1) * cin]) {
                    *gxi += go * *wi;
                }
            }
        }
    }
    let gx = need_x.then(|| Tensor::from_shape_vec(x.shape(), gx).unwrap());
    (
        gx,
        Tensor::from_shape_vec(w.shape(), gw).unwrap(),
        Tensor::vector(gb),
    )
}

fn check_dw<T: Real>(x: &Tensor<T>, k: &Tensor<T>) -> Result<()> {
    if k.channels() != x.channels() || k.height().is_multiple_of(2) || k.width().is_multiple_of(2) {
        return Err(Error::shape(
            "dwconv",
            format!("input {} against kernel {}", x.shape(), k.shape()),
        ));
    }
    Ok(())
}

/// Depthwise convolution (one spatial filter per channel), zero padding.
pub fn dwconv<T: Real>(x: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>> {
    check_dw(x, k)?;
    let (h, w, c) = (x.height(), x.width(), x.channels());
    let (kh, kw) = (k.height(), k.width());
    let (ph, pw) = (kh / 2, kw / 2);
    let (xd, kd) = (x.data(), k.data());
    let mut out = vec![T::zero(); x.len()];
    for y in 0..h {
        for ky in 0..kh {
            let Some(yy) = (y + ky).checked_sub(ph).filter(|&v| v < h) else {
                continue;
            };
            for xo in 0..w {
                let o = &mut out[(y * w + xo) * c..(y * w + xo + 1) * c];
                for kx in 0..kw {
                    let Some(xx) = (xo + kx).checked_sub(pw).filter(|&v| v < w) else {
                        continue;
                    };
                    let src = &xd[(yy * w + xx) * c..(yy * w + xx + 1) * c];
                    let taps = &kd[(ky * kw + kx) * c..(ky * kw + kx + 1) * c];
                    for ((oi, si), ti) in o.iter_mut().zip(src).zip(taps) {
                        *oi += *si * *ti;
                    }
                }
            }
        }
    }
    Tensor::from_shape_vec(x.shape(), out)
}

/// Returns `(gx, gk)`.
pub fn dwconv_backward<T: Real>(
    x: &Tensor<T>,
    k: &Tensor<T>,
    gy: &Tensor<T>,
    need_x: bool,
) -> (Option<Tensor<T>>, Tensor<T>) {
    let (h, w, c) = (x.height(), x.width(), x.channels());
    let (kh, kw) = (k.height(), k.width());
    let (ph, pw) = (kh / 2, kw / 2);
    let (xd, kd, gd) = (x.data(), k.data(), gy.data());
    let mut gk = vec![T::zero(); k.len()];
    let mut gx = if need_x { vec![T::zero(); x.len()] } else { Vec::new() };
    for y in 0..h {
        for ky in 0..kh {
            let Some(yy) = (y + ky).checked_sub(ph).filter(|&v| v < h) else {
                continue;
            };
            for xo in 0..w {
                let g = &gd[(y * w + xo) * c..(y * w + xo + 1) * c];
                for kx in 0..kw {
                    let Some(xx) = (xo + kx).checked_sub(pw).filter(|&v| v < w) else {
                        continue;
                    };
                    let src = (yy * w + xx) * c;
                    let tap = (ky * kw + kx) * c;
                    for ((gki, si), gi) in gk[tap..tap + c].iter_mut().zip(&xd[src..src + c]).zip(g) {
                        *gki += *si * *gi;
                    }
                    if need_x {
                        for ((gxi, ti), gi) in gx[src..src + c].iter_mut().zip(&kd[tap..tap + c]).zip(g) {
                            *gxi += *ti * *gi;
                        }
                    }
                }
            }
        }
    }
    let gx = need_x.then(|| Tensor::from_shape_vec(x.shape(), gx).unwrap());
    (gx, Tensor::from_shape_vec(k.shape(), gk).unwrap())
}

/// Normalized input and reciprocal standard deviation saved for backward.
pub struct LayerNormCache<T> {
    pub xhat: Tensor<T>,
    pub rstd: Vec<T>,
}

/// Per-pixel normalization across channels followed by a channel affine map.
pub fn layer_norm<T: Real>(
    x: &Tensor<T>,
    scale: &Tensor<T>,
    shift: &Tensor<T>,
) -> Result<(Tensor<T>, LayerNormCache<T>)> {
    let c = x.channels();
    if scale.len() != c || shift.len() != c {
        return Err(Error::shape(
            "layer_norm",
            format!("input {} with affine of length {}/{}", x.shape(), scale.len(), shift.len()),
        ));
    }
    let n = T::from_usize(c).unwrap();
    let eps = T::lit(LN_EPS);
    let (sd, bd) = (scale.data(), shift.data());
    let mut xhat = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    let mut rstds = Vec::with_capacity(x.shape().pixels());
    for px in x.data().chunks_exact(c) {
        let mu = px.iter().copied().sum::<T>() / n;
        let var = px.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / n;
        let rstd = T::one() / (var + eps).sqrt();
        rstds.push(rstd);
        for (i, &v) in px.iter().enumerate() {
            let z = (v - mu) * rstd;
            xhat.push(z);
            out.push(z * sd[i] + bd[i]);
        }
    }
    Ok((
        Tensor::from_shape_vec(x.shape(), out)?,
        LayerNormCache {
            xhat: Tensor::from_shape_vec(x.shape(), xhat)?,
            rstd: rstds,
        },
    ))
}

/// Returns `(gx, gscale, gshift)`.
pub fn layer_norm_backward<T: Real>(
    cache: &LayerNormCache<T>,
    scale: &Tensor<T>,
    gy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let c = scale.len();
    let n = T::from_usize(c).unwrap();
    let sd = scale.data();
    let mut gscale = vec![T::zero(); c];
    let mut gshift = vec![T::zero(); c];
    let mut gx = Vec::with_capacity(gy.len());
    let mut gxhat = vec![T::zero(); c];
    for ((g, xh), &rstd) in gy
        .data()
        .chunks_exact(c)
        .zip(cache.xhat.data().chunks_exact(c))
        .zip(&cache.rstd)
    {
        let mut mean_g = T::zero();
        let mut mean_gx = T::zero();
        for i in 0..c {
            gscale[i] += g[i] * xh[i];
            gshift[i] += g[i];
            gxhat[i] = g[i] * sd[i];
            mean_g += gxhat[i];
            mean_gx += gxhat[i] * xh[i];
        }
        mean_g = mean_g / n;
        mean_gx = mean_gx / n;
        for i in 0..c {
            gx.push(rstd * (gxhat[i] - mean_g - xh[i] * mean_gx));
        }
    }
    (
        Tensor::from_shape_vec(gy.shape(), gx).unwrap(),
        Tensor::vector(gscale),
        Tensor::vector(gshift),
    )
}

/// Global average pooling to a `1 × 1 × C` tensor.
pub fn gap<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let c = x.channels();
    let mut acc = vec![T::zero(); c];
    for px in x.data().chunks_exact(c) {
        for (a, v) in acc.iter_mut().zip(px) {
            *a += *v;
        }
    }
    let n = T::from_usize(x.shape().pixels().max(1)).unwrap();
    Tensor::vector(acc.into_iter().map(|v| v / n).collect())
}

pub fn gap_backward<T: Real>(x_shape: Shape, gy: &Tensor<T>) -> Tensor<T> {
    let n = T::from_usize(x_shape.pixels().max(1)).unwrap();
    let g: Vec<T> = gy.data().iter().map(|&v| v / n).collect();
    let mut out = Vec::with_capacity(x_shape.len());
    for _ in 0..x_shape.pixels() {
        out.extend_from_slice(&g);
    }
    Tensor::from_shape_vec(x_shape, out).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Relu,
    Sigmoid,
    Tanh,
}

impl Unary {
    #[inline]
    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Unary::Relu => v.max(T::zero()),
            Unary::Sigmoid => T::one() / (T::one() + (-v).exp()),
            Unary::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    #[inline]
    pub fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Unary::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Unary::Sigmoid => y * (T::one() - y),
            Unary::Tanh => T::one() - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

impl Binary {
    #[inline]
    pub fn apply<T: Real>(self, a: T, b: T) -> T {
        match self {
            Binary::Add => a + b,
            Binary::Sub => a - b,
            Binary::Mul => a * b,
            Binary::Div => a / b,
        }
    }
}

pub fn binary<T: Real>(a: &Tensor<T>, b: &Tensor<T>, op: Binary) -> Result<Tensor<T>> {
    a.zip_with(b, |x, y| op.apply(x, y))
}

/// Sums a broadcast gradient back down to `shape`.
pub fn reduce_to_shape<T: Real>(g: &Tensor<T>, shape: Shape) -> Tensor<T> {
    if g.shape() == shape {
        return g.clone();
    }
    let out_shape = g.shape();
    let s = BroadcastStrides::new(shape, out_shape);
    let mut out = vec![T::zero(); shape.len()];
    let gd = g.data();
    let mut i = 0;
    for y in 0..out_shape.height {
        for x in 0..out_shape.width {
            let base = s.base(y, x);
            for c in 0..out_shape.channels {
                out[base + c * s.c] += gd[i];
                i += 1;
            }
        }
    }
    Tensor::from_shape_vec(shape, out).unwrap()
}

/// Gradients of a broadcasting binary op with respect to both operands.
pub fn binary_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    gy: &Tensor<T>,
    op: Binary,
    need: (bool, bool),
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    // broadcast the operands to the output shape once; shapes were validated in forward
    let full = |t: &Tensor<T>| -> Tensor<T> {
        if t.shape() == gy.shape() {
            t.clone()
        } else {
            Tensor::zeros(gy.height(), gy.width(), gy.channels())
                .zip_with(t, |_, v| v)
                .unwrap()
        }
    };
    let ga = need.0.then(|| {
        let g = match op {
            Binary::Add | Binary::Sub => gy.clone(),
            Binary::Mul => gy.zip_with(&full(b), |g, v| g * v).unwrap(),
            Binary::Div => gy.zip_with(&full(b), |g, v| g / v).unwrap(),
        };
        reduce_to_shape(&g, a.shape())
    });
    let gb = need.1.then(|| {
        let g = match op {
            Binary::Add => gy.clone(),
            Binary::Sub => gy.map(|g| -g),
            Binary::Mul => gy.zip_with(&full(a), |g, v| g * v).unwrap(),
            Binary::Div => {
                let fa = full(a);
                let fb = full(b);
                let q = fa.zip_with(&fb, |x, y| x / (y * y)).unwrap();
                gy.zip_with(&q, |g, v| -g * v).unwrap()
            }
        };
        reduce_to_shape(&g, b.shape())
    });
    (ga, gb)
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel<T: Real>(size: usize, sigma: f64) -> Vec<T> {
    let center = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - center).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / sum)).collect()
}

/// Separable filtering with a symmetric kernel over the valid region only.
/// Output is `(H − n + 1) × (W − n + 1) × C`.
pub fn blur_valid<T: Real>(x: &Tensor<T>, taps: &[T]) -> Result<Tensor<T>> {
    let n = taps.len();
    let (h, w, c) = (x.height(), x.width(), x.channels());
    if h < n || w < n {
        return Err(Error::shape(
            "blur_valid",
            format!("{} is smaller than the {n}-tap window", x.shape()),
        ));
    }
    let (oh, ow) = (h - n + 1, w - n + 1);
    let xd = x.data();
    // horizontal pass: h × ow
    let mut tmp = vec![T::zero(); h * ow * c];
    for y in 0..h {
        for xo in 0..ow {
            let o = &mut tmp[(y * ow + xo) * c..(y * ow + xo + 1) * c];
            for (t, &tap) in taps.iter().enumerate() {
                let s = &xd[(y * w + xo + t) * c..(y * w + xo + t + 1) * c];
                for (oi, si) in o.iter_mut().zip(s) {
                    *oi += tap * *si;
                }
            }
        }
    }
    let mut out = vec![T::zero(); oh * ow * c];
    for yo in 0..oh {
        for (t, &tap) in taps.iter().enumerate() {
            let src = &tmp[(yo + t) * ow * c..(yo + t + 1) * ow * c];
            let dst = &mut out[yo * ow * c..(yo + 1) * ow * c];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += tap * *s;
            }
        }
    }
    Tensor::from_vec(oh, ow, c, out)
}

pub fn blur_valid_backward<T: Real>(x_shape: Shape, taps: &[T], gy: &Tensor<T>) -> Tensor<T> {
    let (h, w, c) = (x_shape.height, x_shape.width, x_shape.channels);
    let (oh, ow) = (gy.height(), gy.width());
    let gd = gy.data();
    let mut gtmp = vec![T::zero(); h * ow * c];
    for yo in 0..oh {
        let src = &gd[yo * ow * c..(yo + 1) * ow * c];
        for (t, &tap) in taps.iter().enumerate() {
            let dst = &mut gtmp[(yo + t) * ow * c..(yo + t + 1) * ow * c];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += tap * *s;
            }
        }
    }
    let mut gx = vec![T::zero(); h * w * c];
    for y in 0..h {
        for xo in 0..ow {
            let g = &gtmp[(y * ow + xo) * c..(y * ow + xo + 1) * c];
            for (t, &tap) in taps.iter().enumerate() {
                let d = &mut gx[(y * w + xo + t) * c..(y * w + xo + t + 1) * c];
                for (di, gi) in d.iter_mut().zip(g) {
                    *di += tap * *gi;
                }
            }
        }
    }
    Tensor::from_shape_vec(x_shape, gx).unwrap()
}

/// 2×2 average pooling with stride 2; odd trailing rows/columns are dropped.
pub fn avg_pool2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = (x.height() / 2, x.width() / 2, x.channels());
    if h == 0 || w == 0 {
        return Err(Error::shape("avg_pool2", format!("{} too small to pool", x.shape())));
    }
    let q = T::lit(0.25);
    Ok(Tensor::from_fn(h, w, c, |y, xx, k| {
        (x.get(2 * y, 2 * xx, k)
            + x.get(2 * y, 2 * xx + 1, k)
            + x.get(2 * y + 1, 2 * xx, k)
            + x.get(2 * y + 1, 2 * xx + 1, k))
            * q
    }))
}

pub fn avg_pool2_backward<T: Real>(x_shape: Shape, gy: &Tensor<T>) -> Tensor<T> {
    let q = T::lit(0.25);
    let mut gx = Tensor::zeros(x_shape.height, x_shape.width, x_shape.channels);
    for y in 0..gy.height() {
        for x in 0..gy.width() {
            for k in 0..gy.channels() {
                let g = gy.get(y, x, k) * q;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    gx.set(2 * y + dy, 2 * x + dx, k, g);
                }
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pointwise_kernel() {
        let x = Tensor::from_fn(3, 3, 2, |y, x, c| (y * 3 + x) as f64 + c as f64 * 0.5);
        let w = Tensor::from_vec(2, 2, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(conv1x1(&x, &w, None).unwrap(), x);
    }

    #[test]
    fn depthwise_ones_on_constant_interior() {
        let x = Tensor::full(5, 5, 2, 0.7f64);
        let k = Tensor::full(3, 3, 2, 1.0);
        let y = dwconv(&x, &k).unwrap();
        assert!((y.get(2, 2, 1) - 9.0 * 0.7).abs() < 1e-12);
        // corner sees 4 taps under zero padding
        assert!((y.get(0, 0, 0) - 4.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn layer_norm_hand_values() {
        let x = Tensor::from_vec(1, 1, 2, vec![1.0f64, -1.0]).unwrap();
        let (y, _) = layer_norm(&x, &Tensor::vector(vec![1.0, 1.0]), &Tensor::vector(vec![0.0, 0.0])).unwrap();
        let expect = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((y.get(0, 0, 0) - expect).abs() < 1e-12);
        assert!((y.get(0, 0, 1) + expect).abs() < 1e-12);

        let c = Tensor::full(2, 2, 3, 4.2f64);
        let (y, _) = layer_norm(&c, &Tensor::vector(vec![1.0; 3]), &Tensor::vector(vec![0.0; 3])).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-12));

        let z = Tensor::zeros(1, 2, 3);
        let b = Tensor::vector(vec![0.1, 0.2, 0.3]);
        let (y, _) = layer_norm(&z, &Tensor::vector(vec![2.0; 3]), &b).unwrap();
        assert_eq!(y.pixel(0, 1), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let x = Tensor::full(13, 12, 1, 0.25f64);
        let taps = gaussian_kernel::<f64>(11, 1.5);
        let y = blur_valid(&x, &taps).unwrap();
        assert_eq!(y.shape(), Shape::new(3, 2, 1));
        assert!(y.data().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(blur_valid(&Tensor::<f64>::zeros(10, 20, 1), &taps).is_err());
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::<f32>::zeros(2, 2, 3);
        assert!(conv1x1(&x, &Tensor::zeros(4, 2, 1), None).is_err());
        assert!(dwconv(&x, &Tensor::zeros(3, 3, 2)).is_err());
        assert!(dwconv(&x, &Tensor::zeros(2, 2, 3)).is_err());
        assert!(layer_norm(&x, &Tensor::vector(vec![1.0; 2]), &Tensor::vector(vec![0.0; 3])).is_err());
    }
}
