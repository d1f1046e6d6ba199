//! Linear reconstruction: how well a target image is explained by a linear
//! map of the top principal components of a descriptor stack.

use serde::Serialize;

use crate::analysis::linalg::{cholesky_solve, Mat};
use crate::analysis::pca::{fit_pca, pixel_matrix};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_COMPONENTS: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LraReport {
    pub components: usize,
    pub lambda: f64,
    pub channel_mse: Vec<f64>,
    pub mse: f64,
    /// `D × C_t` ridge weights.
    pub weights: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Lra {
    pub reconstruction: Tensor<f64>,
    pub report: LraReport,
}

/// `W = (ZᵀZ + λI)⁻¹ Zᵀ T`.
pub fn ridge_solve(z: &Mat, t: &Mat, lambda: f64) -> Result<Mat> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
    }
    if z.rows != t.rows {
        return Err(Error::shape("ridge_solve", format!("{} rows against {}", z.rows, t.rows)));
    }
    let zt = z.transpose();
    let mut a = zt.matmul(z)?;
    for i in 0..a.rows {
        let v = a.get(i, i) + lambda;
        a.set(i, i, v);
    }
    cholesky_solve(&a, &zt.matmul(t)?)
}

fn center_columns(m: &Mat) -> (Mat, Vec<f64>) {
    let mut mean = vec![0.0; m.cols];
    for r in 0..m.rows {
        for (s, v) in mean.iter_mut().zip(m.row(r)) {
            *s += v;
        }
    }
    mean.iter_mut().for_each(|s| *s /= m.rows as f64);
    let mut c = m.clone();
    for r in 0..c.rows {
        for (v, mu) in c.data[r * c.cols..(r + 1) * c.cols].iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    (c, mean)
}

/// Reconstructs `target` from the top `d` principal components of `stack`.
pub fn lra(stack: &Tensor<f64>, target: &Tensor<f64>, d: usize, lambda: f64) -> Result<Lra> {
    let k = stack.channels();
    if d == 0 || d > k {
        return Err(Error::Config(format!("LRA needs 1 <= D <= K, got D={d}, K={k}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
    }
    if stack.height() != target.height() || stack.width() != target.width() {
        return Err(Error::shape("lra", format!("stack {} and target {}", stack.shape(), target.shape())));
    }
    let pca = fit_pca(&pixel_matrix(stack))?;
    let z = pca.project(&pixel_matrix(stack), d)?;
    let (tc, t_mean) = center_columns(&pixel_matrix(target));
    let w = ridge_solve(&z, &tc, lambda)?;
    let mut rec = z.matmul(&w)?;
    let ct = target.channels();
    for r in 0..rec.rows {
        for (v, mu) in rec.data[r * ct..(r + 1) * ct].iter_mut().zip(&t_mean) {
            *v += mu;
        }
    }
    let reconstruction = Tensor::from_vec(target.height(), target.width(), ct, rec.data)?;
    let mut channel_mse = vec![0.0; ct];
    for (i, (a, b)) in reconstruction.data().iter().zip(target.data()).enumerate() {
        channel_mse[i % ct] += (a - b).powi(2);
    }
    let n = target.shape().pixels() as f64;
    channel_mse.iter_mut().for_each(|m| *m /= n);
    let total: f64 = pca.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let report = LraReport {
        components: d,
        lambda,
        mse: channel_mse.iter().sum::<f64>() / ct as f64,
        channel_mse,
        weights: (0..w.rows).map(|r| w.row(r).to_vec()).collect(),
        explained_variance: pca.eigenvalues[..d]
            .iter()
            .map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
            .collect(),
    };
    Ok(Lra {
        reconstruction,
        report,
    })
}
