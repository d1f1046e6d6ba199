//! Principal component analysis of per-pixel descriptor vectors.

use crate::analysis::linalg::{symmetric_eigen, Mat};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `K × K`, column `k` is the k-th principal direction.
    pub components: Mat,
    /// Descending, one per component.
    pub eigenvalues: Vec<f64>,
}

/// `N × K` matrix of pixel vectors, one row per pixel.
pub fn pixel_matrix(stack: &Tensor<f64>) -> Mat {
    Mat {
        rows: stack.shape().pixels(),
        cols: stack.channels(),
        data: stack.data().to_vec(),
    }
}

/// Fits the covariance eigenbasis of the rows of `x`.
pub fn fit_pca(x: &Mat) -> Result<PcaModel> {
    let (n, k) = (x.rows, x.cols);
    if k == 0 || n < k {
        return Err(Error::Config(format!("PCA needs N >= K >= 1, got N={n}, K={k}")));
    }
    if !x.is_finite() {
        return Err(Error::Numerical("PCA input contains non-finite values".into()));
    }
    let mut mean = vec![0.0; k];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = Mat::zeros(k, k);
    let mut c = vec![0.0; k];
    for r in 0..n {
        for (ci, (v, m)) in c.iter_mut().zip(x.row(r).iter().zip(&mean)) {
            *ci = v - m;
        }
        for i in 0..k {
            for j in i..k {
                cov.data[i * k + j] += c[i] * c[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..k {
        for j in i..k {
            let v = cov.get(i, j) / denom;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    let (eigenvalues, components) = symmetric_eigen(&cov)?;
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Rows of `x`, centered.
    pub fn center(&self, x: &Mat) -> Result<Mat> {
        if x.cols != self.dim() {
            return Err(Error::shape("PcaModel::center", format!("{} columns for K={}", x.cols, self.dim())));
        }
        let mut c = x.clone();
        for r in 0..c.rows {
            for (v, m) in c.data[r * c.cols..(r + 1) * c.cols].iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        Ok(c)
    }

    /// Scores `Z = X_c P_d`, `N × d`.
    pub fn project(&self, x: &Mat, d: usize) -> Result<Mat> {
        if d > self.dim() {
            return Err(Error::Config(format!("{d} components requested from K={}", self.dim())));
        }
        self.center(x)?.matmul(&self.components.leading_columns(d))
    }

    /// `Z P_dᵀ + μ`.
    pub fn reconstruct(&self, z: &Mat) -> Result<Mat> {
        let d = z.cols;
        if d > self.dim() {
            return Err(Error::Config(format!("{d} scores for K={}", self.dim())));
        }
        let mut x = z.matmul(&self.components.leading_columns(d).transpose())?;
        for r in 0..x.rows {
            for (v, m) in x.data[r * x.cols..(r + 1) * x.cols].iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn points_on_x_axis() {
        let x = Mat::from_vec(4, 2, vec![-2.0, 0.0, -1.0, 0.0, 1.0, 0.0, 3.0, 0.0]).unwrap();
        let p = fit_pca(&x).unwrap();
        assert_eq!(p.components.column(0), vec![1.0, 0.0]);
        assert!(p.eigenvalues[1].abs() < 1e-15);
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Mat::from_vec(50, 4, (0..200).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let p = fit_pca(&x).unwrap();
        let back = p.reconstruct(&p.project(&x, 4).unwrap()).unwrap();
        let err = back.data.iter().zip(&x.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-4, "{err}");
        let ptp = p.components.transpose().matmul(&p.components).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ptp.get(i, j) - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_pca(&Mat::zeros(2, 3)).is_err());
        assert!(fit_pca(&Mat::from_vec(2, 1, vec![0.0, f64::NAN]).unwrap()).is_err());
    }
}
