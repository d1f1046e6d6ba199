//! Pearson correlation between descriptor groups.
//!
//! Each group (one or more channels) is collapsed to its per-pixel L2 norm
//! before correlating the flattened magnitude maps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major `n × n`. Pairs involving a constant map are 0 off the
    /// diagonal; the diagonal is always 1.
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name");
        for n in &self.names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            s.push_str(n);
            for v in row {
                s.push_str(&format!(",{v:.6}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Per-pixel L2 norm across channels.
pub fn magnitude(t: &Tensor<f64>) -> Vec<f64> {
    t.data()
        .chunks_exact(t.channels())
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}

pub fn magnitude_correlation(groups: &[(String, Tensor<f64>)]) -> Result<CorrelationMatrix> {
    let Some((_, first)) = groups.first() else {
        return Err(Error::Config("no descriptor groups to correlate".into()));
    };
    if let Some((n, t)) = groups
        .iter()
        .find(|(_, t)| t.height() != first.height() || t.width() != first.width() || t.channels() == 0)
    {
        return Err(Error::shape("magnitude_correlation", format!("group '{n}' is {}", t.shape())));
    }
    let mags: Vec<Vec<f64>> = groups.iter().map(|(_, t)| magnitude(t)).collect();
    let n = groups.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        values[i][i] = 1.0;
        for j in i + 1..n {
            let r = pearson(&mags[i], &mags[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: groups.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}
