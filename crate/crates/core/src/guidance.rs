//! Analytic luminance and reflectance guidance stacks.
//!
//! Every descriptor is a closed-form per-pixel function of the RGB triple.
//! The stacks are evaluated in `f64` and stored in the caller's precision;
//! every channel lies in `[0, 1]`. Descriptors whose textbook form leaves
//! that range are mapped back into it:
//!
//! * `Y_L2 = sqrt(R² + G² + B² + ε) / sqrt(3 + ε)`
//! * `Cb`, `Cr` carry the usual `+0.5` offset
//! * `U`, `V`, `O1`, `O2` become `0.5 + 0.5 · x / max|x|`, with `max|x|`
//!   the extreme value of the linear form over the RGB unit cube.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::save_image;
use crate::tensor::{Real, Tensor};

/// Stabilizer used by the ratio and norm descriptors.
pub const EPS: f64 = 1e-6;

pub const LUMINANCE_NAMES: [&str; 4] = ["Y_Rec709", "Y_vmax", "Y_lightness", "Y_L2"];
pub const REFLECTANCE_NAMES: [&str; 5] = ["Cb", "Cr", "r", "g", "S"];
pub const EXTENDED_NAMES: [&str; 6] = ["U", "V", "O1", "O2", "Y_mean", "Y_YCgCo"];

/// The six-descriptor luminance pool examined by importance analysis.
pub const LUMINANCE_POOL_NAMES: [&str; 6] =
    ["Y_Rec709", "Y_mean", "Y_YCgCo", "Y_vmax", "Y_lightness", "Y_L2"];

/// The nine-descriptor chroma pool (core reflectance descriptors plus the
/// YUV and opponent pairs).
pub const CHROMA_POOL_NAMES: [&str; 9] = ["Cb", "Cr", "U", "V", "O1", "O2", "r", "g", "S"];

pub const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];
const CB: [f64; 3] = [-0.168736, -0.331264, 0.5];
const CR: [f64; 3] = [0.5, -0.418688, -0.081312];
const YUV_U: [f64; 3] = [-0.14713, -0.28886, 0.43600];
const YUV_V: [f64; 3] = [0.61500, -0.51499, -0.10001];
const YCGCO_Y: [f64; 3] = [0.25, 0.50, 0.25];

fn opponent1() -> [f64; 3] {
    let k = 1.0 / 2f64.sqrt();
    [k, -k, 0.0]
}

fn opponent2() -> [f64; 3] {
    let k = 1.0 / 6f64.sqrt();
    [k, k, -2.0 * k]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackKind {
    Luminance,
    Reflectance,
    Extended,
    /// Any other selection of descriptors (candidate pools, ablations).
    Custom,
}

/// A tensor of descriptor maps together with the descriptor names.
#[derive(Debug, Clone)]
pub struct GuidanceStack<T> {
    pub tensor: Tensor<T>,
    pub names: Vec<String>,
    pub kind: StackKind,
}

impl<T: Real> GuidanceStack<T> {
    pub fn new(tensor: Tensor<T>, names: Vec<String>, kind: StackKind) -> Result<Self> {
        if tensor.channels() != names.len() {
            return Err(Error::shape(
                "GuidanceStack::new",
                format!("{} channels but {} names", tensor.channels(), names.len()),
            ));
        }
        Ok(Self {
            tensor,
            names,
            kind,
        })
    }

    pub fn depth(&self) -> usize {
        self.names.len()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Single descriptor map as an `H × W × 1` tensor.
    pub fn descriptor(&self, name: &str) -> Result<Tensor<T>> {
        let i = self
            .position(name)
            .ok_or_else(|| Error::Config(format!("unknown descriptor {name}")))?;
        self.tensor.channel(i)
    }

    /// Sub-stack with the named descriptors in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.position(n)
                    .ok_or_else(|| Error::Config(format!("unknown descriptor {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tensor: self.tensor.select_channels(&idx)?,
            names: names.iter().map(|s| s.to_string()).collect(),
            kind: StackKind::Custom,
        })
    }

    /// Channel-wise concatenation of several stacks.
    pub fn concat(parts: &[&GuidanceStack<T>]) -> Result<Self> {
        let tensors: Vec<_> = parts.iter().map(|p| &p.tensor).collect();
        Ok(Self {
            tensor: Tensor::concat_channels(&tensors)?,
            names: parts.iter().flat_map(|p| p.names.iter().cloned()).collect(),
            kind: StackKind::Custom,
        })
    }
}

fn check_rgb<T: Real>(img: &Tensor<T>, op: &'static str) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::shape(
            op,
            format!("expected 3-channel RGB, got {} channels", img.channels()),
        ));
    }
    Ok(())
}

#[inline]
fn dot(c: &[f64; 3], rgb: [f64; 3]) -> f64 {
    c[0] * rgb[0] + c[1] * rgb[1] + c[2] * rgb[2]
}

/// Largest `|c · rgb|` over the unit cube.
fn extent(c: &[f64; 3]) -> f64 {
    let pos: f64 = c.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = c.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    pos.max(neg)
}

#[inline]
fn centered(c: &[f64; 3], rgb: [f64; 3]) -> f64 {
    0.5 + 0.5 * dot(c, rgb) / extent(c)
}

/// Luminance descriptors of one RGB pixel, in [`LUMINANCE_NAMES`] order.
pub fn luminance_pixel(rgb: [f64; 3]) -> [f64; 4] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    [
        dot(&REC709, rgb),
        max,
        0.5 * (max + min),
        (r * r + g * g + b * b + EPS).sqrt() / (3.0 + EPS).sqrt(),
    ]
}

/// Reflectance descriptors of one RGB pixel, in [`REFLECTANCE_NAMES`] order.
pub fn reflectance_pixel(rgb: [f64; 3]) -> [f64; 5] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let sum = r + g + b + EPS;
    [
        dot(&CB, rgb) + 0.5,
        dot(&CR, rgb) + 0.5,
        r / sum,
        g / sum,
        (max - min) / (max + EPS),
    ]
}

/// Extended descriptors of one RGB pixel, in [`EXTENDED_NAMES`] order.
pub fn extended_pixel(rgb: [f64; 3]) -> [f64; 6] {
    [
        centered(&YUV_U, rgb),
        centered(&YUV_V, rgb),
        centered(&opponent1(), rgb),
        centered(&opponent2(), rgb),
        (rgb[0] + rgb[1] + rgb[2]) / 3.0,
        dot(&YCGCO_Y, rgb),
    ]
}

fn build<T: Real, const K: usize>(
    img: &Tensor<T>,
    names: &[&str; K],
    kind: StackKind,
    op: &'static str,
    f: impl Fn([f64; 3]) -> [f64; K],
) -> Result<GuidanceStack<T>> {
    check_rgb(img, op)?;
    let mut data = Vec::with_capacity(img.height() * img.width() * K);
    for px in img.data().chunks_exact(3) {
        let rgb = [
            px[0].to_f64_lossy(),
            px[1].to_f64_lossy(),
            px[2].to_f64_lossy(),
        ];
        data.extend(f(rgb).iter().map(|&v| T::lit(v.clamp(0.0, 1.0))));
    }
    GuidanceStack::new(
        Tensor::from_vec(img.height(), img.width(), K, data)?,
        names.iter().map(|s| s.to_string()).collect(),
        kind,
    )
}

/// `[Y_Rec709, Y_vmax, Y_lightness, Y_L2]` for an RGB image in `[0, 1]`.
pub fn luminance_stack<T: Real>(img: &Tensor<T>) -> Result<GuidanceStack<T>> {
    build(img, &LUMINANCE_NAMES, StackKind::Luminance, "luminance_stack", luminance_pixel)
}

/// `[Cb, Cr, r, g, S]` for an RGB image in `[0, 1]`.
pub fn reflectance_stack<T: Real>(img: &Tensor<T>) -> Result<GuidanceStack<T>> {
    build(
        img,
        &REFLECTANCE_NAMES,
        StackKind::Reflectance,
        "reflectance_stack",
        reflectance_pixel,
    )
}

/// `[U, V, O1, O2, Y_mean, Y_YCgCo]`.
pub fn extended_candidates<T: Real>(img: &Tensor<T>) -> Result<GuidanceStack<T>> {
    build(img, &EXTENDED_NAMES, StackKind::Extended, "extended_candidates", extended_pixel)
}

/// All fifteen descriptors: luminance, reflectance, then extended.
pub fn all_descriptors<T: Real>(img: &Tensor<T>) -> Result<GuidanceStack<T>> {
    let l = luminance_stack(img)?;
    let r = reflectance_stack(img)?;
    let e = extended_candidates(img)?;
    GuidanceStack::concat(&[&l, &r, &e])
}

/// The six luminance candidates in [`LUMINANCE_POOL_NAMES`] order.
pub fn luminance_candidate_pool<T: Real>(img: &Tensor<T>) -> Result<GuidanceStack<T>> {
    all_descriptors(img)?.select(&LUMINANCE_POOL_NAMES)
}

/// The nine chroma candidates in [`CHROMA_POOL_NAMES`] order.
pub fn chroma_candidate_pool<T: Real>(img: &Tensor<T>) -> Result<GuidanceStack<T>> {
    all_descriptors(img)?.select(&CHROMA_POOL_NAMES)
}

/// BT.709 luma of an RGB tensor as `H × W × 1`.
pub fn rec709_gray<T: Real>(img: &Tensor<T>) -> Result<Tensor<T>> {
    check_rgb(img, "rec709_gray")?;
    let w = [T::lit(REC709[0]), T::lit(REC709[1]), T::lit(REC709[2])];
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| w[0] * p[0] + w[1] * p[1] + w[2] * p[2])
        .collect();
    Tensor::from_vec(img.height(), img.width(), 1, data)
}

/// Writes one 8-bit grayscale `<name>.png` per descriptor into `out_dir`,
/// creating the directory when needed. Returns the written paths.
pub fn dump_stack<T: Real>(
    stack: &GuidanceStack<T>,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<std::path::PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    stack
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let path = out_dir.join(format!("{name}.png"));
            save_image(&stack.tensor.channel(i)?, &path)?;
            Ok(path)
        })
        .collect()
}
