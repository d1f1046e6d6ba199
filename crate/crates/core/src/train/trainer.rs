//! Seeded training loop.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::nn::model::{forward, ModelParams, VariantConfig};
use crate::nn::tape::Tape;
use crate::nn::exec::Exec;
use crate::tensor::{Real, Tensor};
use crate::train::data::{sample_batch, Augment, PairedDataset};
use crate::train::loss::{loss_graph, FeatureExtractor, LossValue, LossWeights};
use crate::train::optim::{cosine_lr, Adam, AdamConfig};

pub const TRACE_HEADER: &str = "iter,lr,total,mse,msssim,perc";

/// Training hyper-parameters; serialized as flat JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch: usize,
    pub patch: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lambda_mse: f64,
    pub lambda_msssim: f64,
    pub lambda_perc: f64,
    pub seed: u64,
    pub random_crop: bool,
    pub flip: bool,
    pub rotate: bool,
    /// Trace row interval.
    pub log_every: usize,
    /// Periodic checkpoint interval; 0 writes only the final checkpoint.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch: 8,
            patch: 64,
            lr_start: 2e-4,
            lr_end: 1e-6,
            lambda_mse: 1.0,
            lambda_msssim: 0.2,
            lambda_perc: 0.01,
            seed: 0,
            random_crop: true,
            flip: true,
            rotate: true,
            log_every: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_start > self.lr_end && self.lr_end > 0.0) {
            return Err(Error::Config(format!(
                "need lr_start > lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            )));
        }
        let w = [self.lambda_mse, self.lambda_msssim, self.lambda_perc];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        if self.batch == 0 || self.patch == 0 || self.log_every == 0 {
            return Err(Error::Config("batch, patch and log_every must be positive".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            mse: self.lambda_mse,
            msssim: self.lambda_msssim,
            perc: self.lambda_perc,
        }
    }

    pub fn augment(&self) -> Augment {
        Augment {
            random_crop: self.random_crop,
            flip: self.flip,
            rotate: self.rotate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub lr: f64,
    pub total: f64,
    pub mse: f64,
    pub msssim: f64,
    pub perc: f64,
}

impl TraceRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iter, self.lr, self.total, self.mse, self.msssim, self.perc
        )
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv());
    }
    s
}

/// Loss and parameter gradients for one training pair. The loss is taken
/// on the unclamped output.
pub fn sample_gradients<T: Real>(
    params: &ModelParams<T>,
    variant: &VariantConfig,
    low: &Tensor<T>,
    high: &Tensor<T>,
    weights: &LossWeights,
    hook: Option<&dyn FeatureExtractor<T>>,
) -> Result<(LossValue, HashMap<String, Tensor<T>>)> {
    let mut tape = Tape::new();
    let fwd = forward(&mut tape, params, variant, low)?;
    let gt = tape.input(high.clone());
    let loss = loss_graph(&mut tape, &fwd.output, &gt, weights, hook)?;
    let value = LossValue {
        total: tape.scalar(&loss.total).to_f64_lossy(),
        mse: loss.mse,
        msssim: loss.msssim,
        perc: loss.perc,
    };
    let mut grads = tape.backward(loss.total)?;
    // layers that never entered the graph still need an entry
    for (name, t) in params.iter() {
        grads
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(t.height(), t.width(), t.channels()));
    }
    Ok((value, grads))
}

/// Stateful optimizer loop over a dataset.
pub struct Trainer<'h> {
    pub variant: VariantConfig,
    pub config: TrainConfig,
    params: ModelParams<f32>,
    adam: Adam,
    rng: ChaCha8Rng,
    iter: usize,
    hook: Option<&'h dyn FeatureExtractor<f32>>,
}

impl<'h> Trainer<'h> {
    pub fn new(variant: VariantConfig, config: TrainConfig, params: ModelParams<f32>) -> Result<Self> {
        variant.validate()?;
        config.validate()?;
        params.validate_against(&variant)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            adam: Adam::new(&params, AdamConfig::default()),
            variant,
            config,
            params,
            rng,
            iter: 0,
            hook: None,
        })
    }

    pub fn with_hook(mut self, hook: &'h dyn FeatureExtractor<f32>) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    pub fn into_params(self) -> ModelParams<f32> {
        self.params
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    /// One optimizer step on a freshly sampled batch. The returned row holds
    /// the batch-mean loss before the update.
    pub fn step(&mut self, ds: &PairedDataset) -> Result<TraceRow> {
        let cfg = &self.config;
        let lr = cosine_lr(self.iter, cfg.iterations, cfg.lr_start, cfg.lr_end);
        let batch = sample_batch(ds, cfg.batch, cfg.patch, cfg.augment(), &mut self.rng)?;
        let weights = cfg.weights();
        let mut sum: Option<HashMap<String, Tensor<f32>>> = None;
        let mut comp = LossValue::default();
        for (lo, hi) in &batch {
            let (l, g) = sample_gradients(&self.params, &self.variant, lo, hi, &weights, self.hook)?;
            comp.total += l.total;
            comp.mse += l.mse;
            comp.msssim += l.msssim;
            comp.perc += l.perc;
            match &mut sum {
                None => sum = Some(g),
                Some(acc) => {
                    for (name, _) in self.params.iter() {
                        let a = acc.get_mut(name).expect("every layer has a gradient");
                        for (x, y) in a.data_mut().iter_mut().zip(g[name].data()) {
                            *x += *y;
                        }
                    }
                }
            }
        }
        let n = batch.len() as f64;
        let row = TraceRow {
            iter: self.iter,
            lr,
            total: comp.total / n,
            mse: comp.mse / n,
            msssim: comp.msssim / n,
            perc: comp.perc / n,
        };
        if ![row.total, row.mse, row.msssim, row.perc].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteLoss {
                iter: self.iter,
                total: row.total,
                mse: row.mse,
                msssim: row.msssim,
                perc: row.perc,
            });
        }
        let mut grads = sum.expect("batch is non-empty");
        let inv = 1.0 / n as f32;
        for g in grads.values_mut() {
            g.map_inplace(|v| v * inv);
        }
        self.adam.step(&mut self.params, &grads, lr)?;
        self.iter += 1;
        Ok(row)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    /// Rows at every `log_every`-th iteration.
    pub trace: Vec<TraceRow>,
}

/// Trains from a seeded initialization. With `out_dir`, writes `trace.csv`,
/// periodic `ckpt_NNNNNN.mnx` files and `final.mnx`; zero iterations write
/// only `final.mnx`.
pub fn train(
    ds: &PairedDataset,
    variant: &VariantConfig,
    config: &TrainConfig,
    out_dir: Option<&Path>,
    hook: Option<&dyn FeatureExtractor<f32>>,
) -> Result<TrainOutcome> {
    let params = ModelParams::init(variant, config.seed)?;
    train_from(ds, variant, config, params, out_dir, hook)
}

pub fn train_from(
    ds: &PairedDataset,
    variant: &VariantConfig,
    config: &TrainConfig,
    params: ModelParams<f32>,
    out_dir: Option<&Path>,
    hook: Option<&dyn FeatureExtractor<f32>>,
) -> Result<TrainOutcome> {
    if ds.is_empty() {
        return Err(Error::Dataset("dataset is empty".into()));
    }
    let mut trainer = Trainer::new(*variant, config.clone(), params)?;
    if let Some(h) = hook {
        trainer = trainer.with_hook(h);
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut trace = Vec::new();
    for _ in 0..config.iterations {
        let row = trainer.step(ds)?;
        if row.iter % config.log_every == 0 || row.iter + 1 == config.iterations {
            trace.push(row);
        }
        let done = trainer.iteration();
        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < config.iterations {
                checkpoint::save(dir.join(format!("ckpt_{done:06}.mnx")), trainer.params(), Some(variant))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        if config.iterations > 0 {
            let path = dir.join("trace.csv");
            fs::write(&path, trace_csv(&trace)).map_err(|e| Error::io(&path, e))?;
        }
        checkpoint::save(dir.join("final.mnx"), trainer.params(), Some(variant))?;
    }
    Ok(TrainOutcome {
        params: trainer.into_params(),
        trace,
    })
}
