//! Descriptor importance: how much each descriptor of a pool contributes
//! to the pool's joint gradient map and to its off-axis PCA energy, by
//! leave-one-out comparison.

use std::fmt;

use serde::Serialize;

use crate::analysis::pca::{fit_pca, pixel_matrix, PcaModel};
use crate::error::{Error, Result};
use crate::guidance::GuidanceStack;
use crate::tensor::Tensor;

/// Sobel gradient magnitude of a single-channel map, replicate-padded.
pub fn gradient_map(channel: &Tensor<f64>) -> Result<Tensor<f64>> {
    if channel.channels() != 1 {
        return Err(Error::shape(
            "gradient_map",
            format!("expected one channel, got {}", channel.channels()),
        ));
    }
    let (h, w) = (channel.height(), channel.width());
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        channel.get(y, x, 0)
    };
    Ok(Tensor::from_fn(h, w, 1, |y, x, _| {
        let (y, x) = (y as isize, x as isize);
        let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
            - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
        let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
            - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
        (gx * gx + gy * gy).sqrt()
    }))
}

/// Per-pixel norm of the centered pixel vector over components `k ≥ 2`.
pub fn orthogonal_energy(stack: &Tensor<f64>, pca: &PcaModel) -> Result<Tensor<f64>> {
    let k = stack.channels();
    if k < 2 {
        return Err(Error::Config(format!("orthogonal energy needs K >= 2, got {k}")));
    }
    if pca.dim() != k {
        return Err(Error::shape("orthogonal_energy", format!("PCA of dim {} for K={k}", pca.dim())));
    }
    let z = pca.project(&pixel_matrix(stack), k)?;
    let data = (0..z.rows)
        .map(|r| z.row(r)[1..].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Tensor::from_vec(stack.height(), stack.width(), 1, data)
}

fn joint_gradient(grads: &[Tensor<f64>]) -> Tensor<f64> {
    let mut g = grads[0].clone();
    for other in &grads[1..] {
        for (a, b) in g.data_mut().iter_mut().zip(other.data()) {
            *a = a.max(*b);
        }
    }
    g
}

fn stack_energy(maps: &[&Tensor<f64>]) -> Result<Tensor<f64>> {
    let stack = Tensor::concat_channels(maps)?;
    let pca = fit_pca(&pixel_matrix(&stack))?;
    orthogonal_energy(&stack, &pca)
}

fn positive_drop(full: &Tensor<f64>, reduced: &Tensor<f64>) -> Tensor<f64> {
    full.zip_with(reduced, |a, b| (a - b).max(0.0)).expect("equal shapes")
}

#[derive(Debug, Clone, Serialize)]
pub struct DescriptorImportance {
    pub name: String,
    pub delta_e: f64,
    pub delta_g: f64,
    pub rank_e: usize,
    pub rank_g: usize,
    pub avg_rank: f64,
    #[serde(skip)]
    pub delta_e_map: Tensor<f64>,
    #[serde(skip)]
    pub delta_g_map: Tensor<f64>,
}

/// One row per descriptor, in the order of the input pool.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceReport {
    pub rows: Vec<DescriptorImportance>,
    #[serde(skip)]
    pub joint_gradient: Tensor<f64>,
    #[serde(skip)]
    pub joint_energy: Tensor<f64>,
}

pub const REPORT_HEADER: &str = "prior,deltaE,rankE,deltaG,rankG,avg_rank";

impl ImportanceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6},{},{:.6},{},{:.1}\n",
                r.name, r.delta_e, r.rank_e, r.delta_g, r.rank_g, r.avg_rank
            ));
        }
        s
    }
}

impl fmt::Display for ImportanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>10} {:>6} {:>10} {:>6} {:>9}", "prior", "deltaE", "rankE", "deltaG", "rankG", "avg_rank")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>10.6} {:>6} {:>10.6} {:>6} {:>9.1}",
                r.name, r.delta_e, r.rank_e, r.delta_g, r.rank_g, r.avg_rank
            )?;
        }
        Ok(())
    }
}

/// Rank 1 for the largest score; ties go to the lexicographically smaller
/// name.
fn ranks(scores: &[f64], names: &[&str]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(names[a].cmp(names[b])));
    let mut r = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    r
}

/// Leave-one-out importance of every descriptor in `pool`.
///
/// Work is carried out in name order so the numbers do not depend on the
/// order of the pool; rows come back in pool order.
pub fn descriptor_importance(pool: &GuidanceStack<f64>) -> Result<ImportanceReport> {
    let k = pool.depth();
    if k < 3 {
        return Err(Error::Config(format!("descriptor importance needs K >= 3, got {k}")));
    }
    let mut canon: Vec<usize> = (0..k).collect();
    canon.sort_by(|&a, &b| pool.names[a].cmp(&pool.names[b]));
    if let Some(w) = canon.windows(2).find(|w| pool.names[w[0]] == pool.names[w[1]]) {
        return Err(Error::Config(format!("descriptor '{}' appears twice", pool.names[w[0]])));
    }
    let maps: Vec<Tensor<f64>> = canon.iter().map(|&i| pool.tensor.channel(i)).collect::<Result<_>>()?;
    let grads: Vec<Tensor<f64>> = maps.iter().map(gradient_map).collect::<Result<_>>()?;
    let g_full = joint_gradient(&grads);
    let e_full = stack_energy(&maps.iter().collect::<Vec<_>>())?;

    let mut per: Vec<(Tensor<f64>, Tensor<f64>)> = Vec::with_capacity(k);
    for c in 0..k {
        let rest_g: Vec<Tensor<f64>> = (0..k).filter(|&j| j != c).map(|j| grads[j].clone()).collect();
        let rest_m: Vec<&Tensor<f64>> = (0..k).filter(|&j| j != c).map(|j| &maps[j]).collect();
        let dg = positive_drop(&g_full, &joint_gradient(&rest_g));
        let de = positive_drop(&e_full, &stack_energy(&rest_m)?);
        per.push((de, dg));
    }
    let names: Vec<&str> = canon.iter().map(|&i| pool.names[i].as_str()).collect();
    let de: Vec<f64> = per.iter().map(|(e, _)| e.mean()).collect();
    let dg: Vec<f64> = per.iter().map(|(_, g)| g.mean()).collect();
    let (re, rg) = (ranks(&de, &names), ranks(&dg, &names));

    let mut rows: Vec<Option<DescriptorImportance>> = vec![None; k];
    for (c, (e_map, g_map)) in per.into_iter().enumerate() {
        rows[canon[c]] = Some(DescriptorImportance {
            name: names[c].to_string(),
            delta_e: de[c],
            delta_g: dg[c],
            rank_e: re[c],
            rank_g: rg[c],
            avg_rank: (re[c] + rg[c]) as f64 / 2.0,
            delta_e_map: e_map,
            delta_g_map: g_map,
        });
    }
    Ok(ImportanceReport {
        rows: rows.into_iter().map(|r| r.expect("every row filled")).collect(),
        joint_gradient: g_full,
        joint_energy: e_full,
    })
}
