//! Procedural paired data: random well-lit scenes and darkened copies.
//!
//! A scene is a two-color gradient with random rectangles, ellipses and a
//! faint sinusoidal texture. Its low-light partner is
//! `quantize8(gain · cast_c · scene^γ)` with per-pair gain, gamma and color
//! cast. Both images are 8-bit quantized like stored PNGs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::save_image;
use crate::tensor::Tensor;
use crate::train::data::ImagePair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkenConfig {
    pub gain: (f64, f64),
    pub gamma: (f64, f64),
    pub cast: (f64, f64),
    /// Standard deviation of additive Gaussian noise on the dark image.
    pub noise: f64,
}

impl Default for DarkenConfig {
    fn default() -> Self {
        Self {
            gain: (0.1, 0.25),
            gamma: (1.0, 1.3),
            cast: (0.9, 1.1),
            noise: 0.0,
        }
    }
}

fn quantize8(v: f64) -> f32 {
    ((v.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32
}

fn color<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> [f64; 3] {
    [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

/// A random well-exposed RGB scene.
pub fn scene<R: Rng>(h: usize, w: usize, rng: &mut R) -> Tensor<f32> {
    let a = color(rng, 0.15, 0.9);
    let b = color(rng, 0.15, 0.9);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());
    let mut img: Vec<[f64; 3]> = (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as f64 / h as f64, (i % w) as f64 / w as f64);
            let t = (0.5 + 0.7 * ((x - 0.5) * ca + (y - 0.5) * sa)).clamp(0.0, 1.0);
            [0, 1, 2].map(|c| a[c] * (1.0 - t) + b[c] * t)
        })
        .collect();

    let shapes = rng.gen_range(3..8);
    for _ in 0..shapes {
        let col = color(rng, 0.05, 1.0);
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let ry = rng.gen_range(0.08..0.35) * h as f64;
        let rx = rng.gen_range(0.08..0.35) * w as f64;
        let ellipse = rng.gen::<bool>();
        for (i, px) in img.iter_mut().enumerate() {
            let dy = ((i / w) as f64 - cy) / ry;
            let dx = ((i % w) as f64 - cx) / rx;
            let inside = if ellipse {
                dy * dy + dx * dx <= 1.0
            } else {
                dy.abs() <= 1.0 && dx.abs() <= 1.0
            };
            if inside {
                *px = col;
            }
        }
    }

    let fy = rng.gen_range(0.1..0.6);
    let fx = rng.gen_range(0.1..0.6);
    let amp = rng.gen_range(0.01..0.05);
    let data = img
        .iter()
        .enumerate()
        .flat_map(|(i, px)| {
            let tex = amp * ((i / w) as f64 * fy).sin() * ((i % w) as f64 * fx).cos();
            px.map(|v| quantize8((v + tex).clamp(0.02, 0.98)))
        })
        .collect();
    Tensor::from_vec(h, w, 3, data).expect("scene shape")
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Darkened, 8-bit quantized copy of `scene`.
pub fn darken<R: Rng>(scene: &Tensor<f32>, cfg: &DarkenConfig, rng: &mut R) -> Tensor<f32> {
    let gain = rng.gen_range(cfg.gain.0..=cfg.gain.1);
    let gamma = rng.gen_range(cfg.gamma.0..=cfg.gamma.1);
    let cast = [0, 1, 2].map(|_| rng.gen_range(cfg.cast.0..=cfg.cast.1));
    let mut out = scene.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let mut d = gain * cast[i % 3] * (*v as f64).powf(gamma);
        if cfg.noise > 0.0 {
            d += cfg.noise * gaussian(rng);
        }
        *v = quantize8(d);
    }
    out
}

/// `n` seeded pairs named `synth_0000.png`, ...
pub fn synthetic_pairs(n: usize, h: usize, w: usize, seed: u64, cfg: &DarkenConfig) -> Vec<ImagePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let high = scene(h, w, &mut rng);
            let low = darken(&high, cfg, &mut rng);
            ImagePair::new(format!("synth_{i:04}.png"), low, high).expect("equal shapes")
        })
        .collect()
}

/// Writes pairs in the `low/` + `high/` layout.
pub fn write_dataset(root: impl AsRef<Path>, pairs: &[ImagePair]) -> Result<()> {
    let root = root.as_ref();
    for sub in ["low", "high"] {
        let d = root.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for p in pairs {
        save_image(&p.low, root.join("low").join(&p.name))?;
        save_image(&p.high, root.join("high").join(&p.name))?;
    }
    Ok(())
}
