//! Adam and the cosine learning-rate schedule.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::ModelParams;
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state. Moments are kept in `f64`, one buffer per layer in
/// registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Real>(params: &ModelParams<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. `grads` must hold exactly one tensor per
    /// parameter, of matching shape.
    pub fn step<T: Real>(
        &mut self,
        params: &mut ModelParams<T>,
        grads: &HashMap<String, Tensor<T>>,
        lr: f64,
    ) -> Result<()> {
        if grads.len() != params.num_layers() || self.m.len() != params.num_layers() {
            return Err(Error::Config(format!(
                "gradient set has {} entries for {} parameters",
                grads.len(),
                params.num_layers()
            )));
        }
        for (name, p) in params.iter() {
            match grads.get(name) {
                Some(g) if g.shape() == p.shape() => {}
                Some(g) => {
                    return Err(Error::shape(
                        "adam_step",
                        format!("gradient for '{name}' is {} but parameter is {}", g.shape(), p.shape()),
                    ))
                }
                None => return Err(Error::Config(format!("no gradient for '{name}'"))),
            }
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (i, (name, p)) in params.iter_mut().enumerate() {
            let g = &grads[name];
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (pv, gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let g = gv.to_f64_lossy();
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                let upd = lr * mhat / (vhat.sqrt() + eps);
                *pv = T::lit(pv.to_f64_lossy() - upd);
            }
        }
        Ok(())
    }
}

/// `lr_end + ½(lr_start − lr_end)(1 + cos(π t / iterations))`.
pub fn cosine_lr(iter: usize, iterations: usize, lr_start: f64, lr_end: f64) -> f64 {
    if iterations == 0 {
        return lr_start;
    }
    let t = iter.min(iterations) as f64 / iterations as f64;
    lr_end + 0.5 * (lr_start - lr_end) * (1.0 + (std::f64::consts::PI * t).cos())
}
