//! Demo state independent of the browser: one dark/reference pair, its
//! guidance descriptors and a Nano model trained on it step by step.

use multinex::analysis::lra;
use multinex::guidance::{all_descriptors, luminance_stack, reflectance_stack, GuidanceStack};
use multinex::io::{from_rgba8, to_rgba8};
use multinex::metrics::psnr;
use multinex::nn::{enhance, ModelParams, VariantConfig};
use multinex::train::synth::{darken, scene};
use multinex::train::{DarkenConfig, ImagePair, PairedDataset, TrainConfig, Trainer};
use multinex::{Error, Result, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Steps in the learning-rate schedule; training stops there.
pub const SCHEDULE: usize = 2000;

pub struct Session {
    pair: ImagePair,
    descriptors: GuidanceStack<f64>,
    dataset: PairedDataset,
    trainer: Trainer<'static>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iteration: usize,
    pub loss: f64,
    pub psnr: f64,
}

fn train_config(h: usize, w: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        iterations: SCHEDULE,
        batch: 1,
        patch: h.min(w).min(64),
        lr_start: 5e-3,
        lr_end: 2.5e-5,
        seed,
        random_crop: true,
        flip: false,
        rotate: false,
        ..TrainConfig::default()
    }
}

impl Session {
    pub fn new(reference: Tensor<f32>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let low = darken(&reference, &DarkenConfig::default(), &mut rng);
        let pair = ImagePair::new("demo", low, reference)?;
        let descriptors = all_descriptors(&pair.low.cast::<f64>())?;
        let dataset = PairedDataset::from_pairs(vec![pair.clone()])?;
        let variant = VariantConfig::nano();
        let cfg = train_config(pair.low.height(), pair.low.width(), seed);
        let trainer = Trainer::new(variant, cfg, ModelParams::init(&variant, seed)?)?;
        Ok(Self {
            pair,
            descriptors,
            dataset,
            trainer,
        })
    }

    /// A generated scene as the reference.
    pub fn synthetic(size: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(scene(size, size, &mut rng), seed)
    }

    /// A canvas image as the reference.
    pub fn from_rgba(rgba: &[u8], width: usize, height: usize, seed: u64) -> Result<Self> {
        Self::new(from_rgba8(rgba, width, height)?, seed)
    }

    pub fn width(&self) -> usize {
        self.pair.low.width()
    }

    pub fn height(&self) -> usize {
        self.pair.low.height()
    }

    pub fn low_rgba(&self) -> Vec<u8> {
        to_rgba8(&self.pair.low)
    }

    pub fn reference_rgba(&self) -> Vec<u8> {
        to_rgba8(&self.pair.high)
    }

    pub fn descriptor_names(&self) -> Vec<String> {
        self.descriptors.names.clone()
    }

    /// A descriptor of the dark image, min-max stretched for display.
    pub fn descriptor_rgba(&self, name: &str) -> Result<Vec<u8>> {
        let d = self.descriptors.descriptor(name)?;
        let (lo, hi) = (d.min_value(), d.max_value());
        let shown = if hi > lo { d.map(|v| (v - lo) / (hi - lo)) } else { d };
        Ok(to_rgba8(&shown))
    }

    /// Reconstructs the reference from the top `d` components of a stack of
    /// the dark image. Returns the picture and its MSE.
    pub fn lra_rgba(&self, stack: &str, d: usize, lambda: f64) -> Result<(Vec<u8>, f64)> {
        let low = self.pair.low.cast::<f64>();
        let s = match stack {
            "luminance" => luminance_stack(&low)?,
            "reflectance" => reflectance_stack(&low)?,
            "both" => GuidanceStack::concat(&[&luminance_stack(&low)?, &reflectance_stack(&low)?])?,
            "all" => self.descriptors.clone(),
            other => return Err(Error::Config(format!("unknown stack '{other}'"))),
        };
        let out = lra(&s.tensor, &self.pair.high.cast::<f64>(), d, lambda)?;
        Ok((to_rgba8(&out.reconstruction), out.report.mse))
    }

    pub fn iteration(&self) -> usize {
        self.trainer.iteration()
    }

    /// Up to `n` more optimizer steps, never past the schedule.
    pub fn train(&mut self, n: usize) -> Result<StepReport> {
        let mut loss = f64::NAN;
        for _ in 0..n.min(SCHEDULE - self.iteration()) {
            loss = self.trainer.step(&self.dataset)?.total;
        }
        let (_, p) = self.enhanced()?;
        Ok(StepReport {
            iteration: self.iteration(),
            loss,
            psnr: p,
        })
    }

    /// The current model output and its PSNR against the reference.
    pub fn enhanced(&self) -> Result<(Tensor<f32>, f64)> {
        let out = enhance(&self.pair.low, self.trainer.params(), &self.trainer.variant)?.output;
        let p = psnr(&out, &self.pair.high)?;
        Ok((out, p))
    }
}
