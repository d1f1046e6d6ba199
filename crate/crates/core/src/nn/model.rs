//! Two-branch residual enhancement model.
//!
//! `Î = clamp(I + Δ_L ⊙ Δ_R)` with `Δ_L = f_L(S_L(I))` (one channel) and
//! `Δ_R = f_R(S_R(I))` (three channels). Each `f` is a fusion module; see
//! [`crate::nn::blocks`].

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{luminance_stack, reflectance_stack};
use crate::nn::blocks::{fusion_module, FusionShape};
use crate::nn::exec::{Eager, Exec};
use crate::tensor::{Real, Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Lightweight,
    Nano,
}

/// How the branch outputs are combined into the enhanced image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// `I + Δ_L ⊙ Δ_R`
    #[default]
    Full,
    /// `I + f_L(S_L)`
    LuminanceOnly,
    /// `I + f_R(S_R)`
    ReflectanceOnly,
    /// `f(I)`: one fusion module fed with raw RGB, no residual.
    RawRgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub name: VariantName,
    /// Hidden width `C`.
    pub hidden: usize,
    /// Fusion blocks per stage `T`.
    pub depth: usize,
    /// Excitation bottleneck `d` inside every MSEF.
    pub bottleneck: usize,
    /// Simplified fusion path: no first FB stage, no leading MSEF per block.
    pub nano_simplified: bool,
    #[serde(default)]
    pub formulation: Formulation,
}

impl VariantConfig {
    pub fn lightweight() -> Self {
        Self {
            name: VariantName::Lightweight,
            hidden: 39,
            depth: 3,
            bottleneck: 5,
            nano_simplified: false,
            formulation: Formulation::Full,
        }
    }

    pub fn nano() -> Self {
        Self {
            name: VariantName::Nano,
            hidden: 3,
            depth: 1,
            bottleneck: 2,
            nano_simplified: true,
            formulation: Formulation::Full,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lightweight" => Ok(Self::lightweight()),
            "nano" => Ok(Self::nano()),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected lightweight or nano)"
            ))),
        }
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.depth == 0 {
            return Err(Error::Config("hidden width and depth must be positive".into()));
        }
        if self.bottleneck == 0 || self.bottleneck >= self.hidden.max(2) {
            return Err(Error::Config(format!(
                "bottleneck d={} must satisfy 1 <= d < C={} (or d=1 when C=1)",
                self.bottleneck, self.hidden
            )));
        }
        Ok(())
    }

    fn fusion_shape(&self) -> FusionShape {
        FusionShape {
            depth: self.depth,
            simplified: self.nano_simplified,
        }
    }

    /// The fusion modules this configuration instantiates.
    pub fn branches(&self) -> Vec<Branch> {
        let lum = Branch {
            prefix: "lum",
            input: BranchInput::Luminance,
            in_channels: 4,
            out_channels: 1,
            out_init: OutInit::Zero,
        };
        let mut refl = Branch {
            prefix: "ref",
            input: BranchInput::Reflectance,
            in_channels: 5,
            out_channels: 3,
            out_init: OutInit::UnitBias,
        };
        match self.formulation {
            Formulation::Full => vec![lum, refl],
            Formulation::LuminanceOnly => vec![lum],
            Formulation::ReflectanceOnly => {
                refl.out_init = OutInit::Zero;
                vec![refl]
            }
            Formulation::RawRgb => vec![Branch {
                prefix: "rgb",
                input: BranchInput::Rgb,
                in_channels: 3,
                out_channels: 3,
                out_init: OutInit::Uniform,
            }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchInput {
    Luminance,
    Reflectance,
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutInit {
    /// Weights and bias zero: the branch starts as the zero map.
    Zero,
    /// Small uniform weights, bias one.
    UnitBias,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    pub prefix: &'static str,
    pub input: BranchInput,
    pub in_channels: usize,
    pub out_channels: usize,
    pub out_init: OutInit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Uniform(f64),
    Zeros,
    Ones,
    Const(f64),
}

#[derive(Debug, Clone)]
struct LayerSpec {
    name: String,
    shape: Shape,
    init: Init,
}

fn fan_bound(fan_in: usize) -> f64 {
    (1.0 / fan_in as f64).sqrt()
}

struct LayoutBuilder {
    specs: Vec<LayerSpec>,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, shape: Shape, init: Init) {
        self.specs.push(LayerSpec { name, shape, init });
    }

    fn conv1x1(&mut self, prefix: &str, cin: usize, cout: usize, bias: bool) {
        let u = Init::Uniform(fan_bound(cin));
        self.push(format!("{prefix}.w"), Shape::new(cout, cin, 1), u);
        if bias {
            self.push(format!("{prefix}.b"), Shape::new(1, 1, cout), u);
        }
    }

    fn dw(&mut self, name: String, k: usize, c: usize) {
        self.push(name, Shape::new(k, k, c), Init::Uniform(fan_bound(k * k)));
    }

    fn msef(&mut self, prefix: &str, c: usize, d: usize) {
        self.push(format!("{prefix}.ln.scale"), Shape::new(1, 1, c), Init::Ones);
        self.push(format!("{prefix}.ln.shift"), Shape::new(1, 1, c), Init::Zeros);
        self.dw(format!("{prefix}.dw"), 3, c);
        self.push(format!("{prefix}.w1"), Shape::new(d, c, 1), Init::Uniform(fan_bound(c)));
        self.push(format!("{prefix}.w2"), Shape::new(c, d, 1), Init::Uniform(fan_bound(d)));
    }

    fn fusion_block(&mut self, prefix: &str, c: usize, d: usize, simplified: bool) {
        if !simplified {
            self.msef(&format!("{prefix}.msef_a"), c, d);
        }
        self.dw(format!("{prefix}.ds.dw"), 3, c);
        self.conv1x1(&format!("{prefix}.ds.pw"), c, c, true);
        self.msef(&format!("{prefix}.msef_b"), c, d);
    }
}

/// Registry layout in checkpoint order.
fn layout(cfg: &VariantConfig) -> Vec<LayerSpec> {
    let (c, d, t) = (cfg.hidden, cfg.bottleneck, cfg.depth);
    let mut b = LayoutBuilder { specs: Vec::new() };
    for br in cfg.branches() {
        let p = br.prefix;
        b.conv1x1(&format!("{p}.in"), br.in_channels, c, true);
        if !cfg.nano_simplified {
            for i in 0..t {
                b.fusion_block(&format!("{p}.fb1.{i}"), c, d, false);
            }
        }
        b.dw(format!("{p}.cwa.dw"), 7, br.in_channels);
        b.conv1x1(&format!("{p}.cwa.proj"), br.in_channels, c, false);
        for i in 0..t {
            b.fusion_block(&format!("{p}.fb2.{i}"), c, d, cfg.nano_simplified);
        }
        let (w_init, b_init) = match br.out_init {
            OutInit::Zero => (Init::Zeros, Init::Zeros),
            OutInit::UnitBias => (Init::Uniform(fan_bound(c)), Init::Const(1.0)),
            OutInit::Uniform => (Init::Uniform(fan_bound(c)), Init::Uniform(fan_bound(c))),
        };
        b.push(format!("{p}.out.w"), Shape::new(br.out_channels, c, 1), w_init);
        b.push(format!("{p}.out.b"), Shape::new(1, 1, br.out_channels), b_init);
    }
    b.specs
}

/// Named, ordered weight registry.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Real> ModelParams<T> {
    pub fn from_entries(entries: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (name, _)) in entries.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Checkpoint(format!("duplicate layer '{name}'")));
            }
        }
        Ok(Self { entries, index })
    }

    /// Seeded initialization: zero final projection on the gating branch,
    /// `U(±sqrt(1/fan_in))` elsewhere, layer norms at identity.
    pub fn init(cfg: &VariantConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = layout(cfg)
            .into_iter()
            .map(|spec| {
                let s = spec.shape;
                let t = match spec.init {
                    Init::Zeros => Tensor::zeros(s.height, s.width, s.channels),
                    Init::Ones => Tensor::full(s.height, s.width, s.channels, T::one()),
                    Init::Const(v) => Tensor::full(s.height, s.width, s.channels, T::lit(v)),
                    Init::Uniform(a) => Tensor::from_fn(s.height, s.width, s.channels, |_, _, _| {
                        T::lit(rng.gen_range(-a..a))
                    }),
                };
                (spec.name, t)
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::Checkpoint(format!("missing layer '{name}'")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.entries[i].1),
            None => Err(Error::Checkpoint(format!("missing layer '{name}'"))),
        }
    }

    /// Replaces a layer, keeping its shape.
    pub fn set(&mut self, name: &str, t: Tensor<T>) -> Result<()> {
        let slot = self.get_mut(name)?;
        if slot.shape() != t.shape() {
            return Err(Error::shape(
                "ModelParams::set",
                format!("layer '{name}' is {} but got {}", slot.shape(), t.shape()),
            ));
        }
        *slot = t;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn num_layers(&self) -> usize {
        self.entries.len()
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            entries: self.entries.iter().map(|(n, t)| (n.clone(), t.cast())).collect(),
            index: self.index.clone(),
        }
    }

    /// Checks names, order and shapes against a configuration.
    pub fn validate_against(&self, cfg: &VariantConfig) -> Result<()> {
        let specs = layout(cfg);
        for (i, spec) in specs.iter().enumerate() {
            match self.entries.get(i) {
                None => {
                    return Err(Error::Checkpoint(format!(
                        "layer '{}' missing from weights",
                        spec.name
                    )))
                }
                Some((name, t)) if *name != spec.name || t.shape() != spec.shape => {
                    return Err(Error::Checkpoint(format!(
                        "layer '{}' expected {} {}, found '{}' {}",
                        spec.name,
                        spec.name,
                        spec.shape,
                        name,
                        t.shape()
                    )))
                }
                _ => {}
            }
        }
        if let Some((name, _)) = self.entries.get(specs.len()) {
            return Err(Error::Checkpoint(format!("unexpected extra layer '{name}'")));
        }
        Ok(())
    }
}

/// Output of a forward pass. Deltas are `None` when the formulation does
/// not use the corresponding branch.
#[derive(Debug, Clone)]
pub struct Forward<V> {
    /// `I + Δ`, before clamping.
    pub output: V,
    pub delta_l: Option<V>,
    pub delta_r: Option<V>,
}

/// Records the model on any backend. The guidance stacks are constant
/// functions of the input and enter as non-trainable inputs.
pub fn forward<T: Real, E: Exec<T>>(
    ex: &mut E,
    params: &ModelParams<T>,
    cfg: &VariantConfig,
    img: &Tensor<T>,
) -> Result<Forward<E::V>> {
    if img.channels() != 3 {
        return Err(Error::shape("forward", format!("expected RGB input, got {}", img.shape())));
    }
    let shape = cfg.fusion_shape();
    let mut delta_l = None;
    let mut delta_r = None;
    let mut raw = None;
    for br in cfg.branches() {
        let stack = match br.input {
            BranchInput::Luminance => luminance_stack(img)?.tensor,
            BranchInput::Reflectance => reflectance_stack(img)?.tensor,
            BranchInput::Rgb => img.clone(),
        };
        let s = ex.input(stack);
        let out = fusion_module(ex, params, br.prefix, &s, shape)?;
        match br.input {
            BranchInput::Luminance => delta_l = Some(out),
            BranchInput::Reflectance => delta_r = Some(out),
            BranchInput::Rgb => raw = Some(out),
        }
    }
    let output = match (cfg.formulation, &delta_l, &delta_r) {
        (Formulation::RawRgb, _, _) => raw.expect("rgb branch"),
        (_, Some(dl), Some(dr)) => {
            let i = ex.input(img.clone());
            let d = ex.mul(dl, dr)?;
            ex.add(&i, &d)?
        }
        (_, Some(d), None) | (_, None, Some(d)) => {
            let i = ex.input(img.clone());
            ex.add(&i, d)?
        }
        (_, None, None) => unreachable!("every formulation has a branch"),
    };
    Ok(Forward {
        output,
        delta_l,
        delta_r,
    })
}

#[derive(Debug, Clone)]
pub struct Enhanced<T> {
    /// Clamped to `[0, 1]`.
    pub output: Tensor<T>,
    pub delta_l: Option<Tensor<T>>,
    pub delta_r: Option<Tensor<T>>,
}

pub fn enhance<T: Real>(img: &Tensor<T>, params: &ModelParams<T>, cfg: &VariantConfig) -> Result<Enhanced<T>> {
    let fwd = forward(&mut Eager, params, cfg, img)?;
    Ok(Enhanced {
        output: fwd.output.clamp(T::zero(), T::one()),
        delta_l: fwd.delta_l,
        delta_r: fwd.delta_r,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRow {
    pub name: String,
    pub shape: Shape,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTable {
    pub rows: Vec<ParamRow>,
    pub total: usize,
}

impl fmt::Display for ParamTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>10}  {:>8}", "layer", "shape", "params")?;
        for r in &self.rows {
            writeln!(f, "{:<width$}  {:>10}  {:>8}", r.name, r.shape.to_string(), r.count)?;
        }
        write!(f, "{:<width$}  {:>10}  {:>8}", "total", "", self.total)
    }
}

/// Trainable reals per layer, in registry order.
pub fn count_params(cfg: &VariantConfig) -> Result<ParamTable> {
    cfg.validate()?;
    let rows: Vec<ParamRow> = layout(cfg)
        .into_iter()
        .map(|s| ParamRow {
            count: s.shape.len(),
            name: s.name,
            shape: s.shape,
        })
        .collect();
    let total = rows.iter().map(|r| r.count).sum();
    Ok(ParamTable { rows, total })
}

/// Multiply-accumulates of all convolutions at `h × w`. A `k×k` convolution
/// from `cin` to `cout` channels costs `k·k·cin·cout·h·w`; depthwise
/// convolutions have one input per output. Excitation projections act on
/// the pooled vector and cost `d·C` each.
pub fn count_macs(cfg: &VariantConfig, h: usize, w: usize) -> Result<u64> {
    cfg.validate()?;
    let hw = (h * w) as u64;
    let (c, d, t) = (cfg.hidden as u64, cfg.bottleneck as u64, cfg.depth as u64);
    let msef = 9 * c * hw + 2 * d * c;
    let ds = 9 * c * hw + c * c * hw;
    let fb_full = 2 * msef + ds;
    let fb_simple = msef + ds;
    let mut total = 0;
    for br in cfg.branches() {
        let k = br.in_channels as u64;
        let out = br.out_channels as u64;
        total += k * c * hw;
        total += 49 * k * hw + k * c * hw;
        total += if cfg.nano_simplified {
            t * fb_simple
        } else {
            2 * t * fb_full
        };
        total += c * out * hw;
    }
    Ok(total)
}

/// `2 · MACs / 1e9`.
pub fn count_gflops(cfg: &VariantConfig, h: usize, w: usize) -> Result<f64> {
    Ok(2.0 * count_macs(cfg, h, w)? as f64 / 1e9)
}
