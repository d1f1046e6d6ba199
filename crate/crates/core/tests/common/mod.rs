//! Shared fixtures and independent reference implementations for the
//! integration tests. Nothing here calls into the library's numeric kernels;
//! the oracles are plain nested loops over `f64` values.

#![allow(dead_code)]

pub mod suite;

use multinex::nn::tape::{Tape, Var};
use multinex::nn::{Exec, ModelParams};
use multinex::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(h, w, c, |_, _, _| rng.gen_range(lo..hi))
}

/// Uniform values, resampled while closer than `margin` to any of `kinks`.
pub fn uniform_avoiding(
    rng: &mut ChaCha8Rng,
    shape: (usize, usize, usize),
    range: (f64, f64),
    kinks: &[f64],
    margin: f64,
) -> Tensor<f64> {
    Tensor::from_fn(shape.0, shape.1, shape.2, |_, _, _| loop {
        let v = rng.gen_range(range.0..range.1);
        if kinks.iter().all(|k| (v - k).abs() > margin) {
            break v;
        }
    })
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

pub const FD_STEP: f64 = 1e-6;

/// Builds a scalar from named leaves registered through `Tape::param`.
pub type Builder<'a> = dyn Fn(&mut Tape<f64>, &ModelParams<f64>) -> Result<Var> + 'a;

fn scalar_of(build: &Builder, params: &ModelParams<f64>) -> f64 {
    let mut tape = Tape::new();
    let root = build(&mut tape, params).expect("graph builds");
    tape.value(&root).data()[0]
}

/// Worst relative error `‖g_tape − g_fd‖ / max(‖g_tape‖, ‖g_fd‖)` over all
/// named leaves, with central differences of step [`FD_STEP`]. Leaves whose
/// gradients are both below 1e-9 in norm count as exact.
pub fn grad_check(params: &ModelParams<f64>, build: &Builder) -> (f64, String) {
    let mut tape = Tape::new();
    let root = build(&mut tape, params).expect("graph builds");
    let analytic = tape.backward(root).expect("backward");
    let mut worst = (0.0, String::new());
    let mut probe = params.clone();
    for (name, t) in params.iter() {
        let mut numeric = vec![0.0; t.len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let x0 = t.data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = x0 + FD_STEP;
            let fp = scalar_of(build, &probe);
            probe.get_mut(name).unwrap().data_mut()[i] = x0 - FD_STEP;
            let fm = scalar_of(build, &probe);
            probe.get_mut(name).unwrap().data_mut()[i] = x0;
            *slot = (fp - fm) / (2.0 * FD_STEP);
        }
        let a = analytic[name].data();
        let diff = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = if na.max(nn) < 1e-9 { 0.0 } else { diff / na.max(nn) };
        if rel > worst.0 {
            worst = (rel, name.to_string());
        }
    }
    worst
}

/// `mean(out ⊙ R)` for a fixed random `R`, so every output element carries a
/// distinct upstream gradient.
pub fn weighted_sum(tape: &mut Tape<f64>, out: &Var, seed: u64) -> Result<Var> {
    let s = tape.value(out).shape();
    let mut r = rng(seed ^ 0x5eed);
    let w = tape.input(uniform(&mut r, s.height, s.width, s.channels, -1.0, 1.0));
    let p = tape.mul(out, &w)?;
    Ok(tape.mean(&p))
}

pub fn leaves(entries: Vec<(&str, Tensor<f64>)>) -> ModelParams<f64> {
    ModelParams::from_entries(entries.into_iter().map(|(n, t)| (n.to_string(), t)).collect()).unwrap()
}

// ---------------------------------------------------------------------------
// Scalar guidance oracle, written directly from the descriptor definitions.

pub const E: f64 = 1e-6;

pub fn oracle_luminance(r: f64, g: f64, b: f64) -> [f64; 4] {
    let mx = r.max(g).max(b);
    let mn = r.min(g).min(b);
    let y709 = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    let l2 = (r * r + g * g + b * b + E).sqrt() / (3.0 + E).sqrt();
    [y709, mx, 0.5 * (mx + mn), l2].map(|v| v.clamp(0.0, 1.0))
}

pub fn oracle_reflectance(r: f64, g: f64, b: f64) -> [f64; 5] {
    let mx = r.max(g).max(b);
    let mn = r.min(g).min(b);
    let cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 0.5;
    let cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 0.5;
    let s = r + g + b + E;
    [cb, cr, r / s, g / s, (mx - mn) / (mx + E)].map(|v| v.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Straight-line forward oracle of the fusion network.

/// `[y][x][c]` image.
pub type Img = Vec<Vec<Vec<f64>>>;

pub fn to_img(t: &Tensor<f64>) -> Img {
    (0..t.height())
        .map(|y| (0..t.width()).map(|x| (0..t.channels()).map(|c| t.get(y, x, c)).collect()).collect())
        .collect()
}

fn dims(a: &Img) -> (usize, usize, usize) {
    (a.len(), a[0].len(), a[0][0].len())
}

fn pw(a: &Img, w: &Tensor<f64>, b: Option<&Tensor<f64>>) -> Img {
    let (h, wd, cin) = dims(a);
    let cout = w.height();
    let mut out = vec![vec![vec![0.0; cout]; wd]; h];
    for y in 0..h {
        for x in 0..wd {
            for o in 0..cout {
                let mut s = b.map_or(0.0, |b| b.data()[o]);
                for i in 0..cin {
                    s += w.get(o, i, 0) * a[y][x][i];
                }
                out[y][x][o] = s;
            }
        }
    }
    out
}

fn dw(a: &Img, k: &Tensor<f64>) -> Img {
    let (h, w, c) = dims(a);
    let (kh, kw) = (k.height() as isize, k.width() as isize);
    let mut out = vec![vec![vec![0.0; c]; w]; h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            for ch in 0..c {
                let mut s = 0.0;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let (yy, xx) = (y + dy - kh / 2, x + dx - kw / 2);
                        if yy >= 0 && xx >= 0 && yy < h as isize && xx < w as isize {
                            s += k.get(dy as usize, dx as usize, ch) * a[yy as usize][xx as usize][ch];
                        }
                    }
                }
                out[y as usize][x as usize][ch] = s;
            }
        }
    }
    out
}

fn map(a: &Img, f: impl Fn(f64) -> f64) -> Img {
    a.iter().map(|r| r.iter().map(|p| p.iter().map(|&v| f(v)).collect()).collect()).collect()
}

fn zip(a: &Img, b: &Img, f: impl Fn(f64, f64) -> f64) -> Img {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(pa, pb)| pa.iter().zip(pb).map(|(&x, &y)| f(x, y)).collect()).collect())
        .collect()
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn oracle_msef(p: &ModelParams<f64>, prefix: &str, x: &Img) -> Img {
    let g = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap();
    let (scale, shift) = (g("ln.scale").data(), g("ln.shift").data());
    let ln: Img = x
        .iter()
        .map(|row| {
            row.iter()
                .map(|px| {
                    let n = px.len() as f64;
                    let mu = px.iter().sum::<f64>() / n;
                    let var = px.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
                    px.iter()
                        .enumerate()
                        .map(|(i, v)| (v - mu) / (var + 1e-5).sqrt() * scale[i] + shift[i])
                        .collect()
                })
                .collect()
        })
        .collect();
    let (h, w, c) = dims(&ln);
    let mut pooled = vec![0.0; c];
    for row in &ln {
        for px in row {
            for (s, v) in pooled.iter_mut().zip(px) {
                *s += v / (h * w) as f64;
            }
        }
    }
    let (w1, w2) = (g("w1"), g("w2"));
    let hidden: Vec<f64> = (0..w1.height())
        .map(|o| (0..c).map(|i| w1.get(o, i, 0) * pooled[i]).sum::<f64>().max(0.0))
        .collect();
    let gate: Vec<f64> = (0..c)
        .map(|o| (0..hidden.len()).map(|i| w2.get(o, i, 0) * hidden[i]).sum::<f64>().tanh())
        .collect();
    let local = dw(&ln, g("dw"));
    let mut out = x.clone();
    for y in 0..h {
        for xx in 0..w {
            for ch in 0..c {
                out[y][xx][ch] += local[y][xx][ch] * ln[y][xx][ch] * gate[ch];
            }
        }
    }
    out
}

fn oracle_block(p: &ModelParams<f64>, prefix: &str, x: &Img, simplified: bool) -> Img {
    let g = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap();
    let h = if simplified { x.clone() } else { oracle_msef(p, &format!("{prefix}.msef_a"), x) };
    let h = pw(&dw(&h, g("ds.dw")), g("ds.pw.w"), Some(g("ds.pw.b")));
    oracle_msef(p, &format!("{prefix}.msef_b"), &map(&h, |v| v.max(0.0)))
}

pub fn oracle_cwa(p: &ModelParams<f64>, prefix: &str, s: &Img) -> Img {
    let d = dw(s, p.get(&format!("{prefix}.cwa.dw")).unwrap());
    map(&pw(&d, p.get(&format!("{prefix}.cwa.proj.w")).unwrap(), None), sigmoid)
}

pub fn oracle_fusion(p: &ModelParams<f64>, prefix: &str, s: &Img, depth: usize, simplified: bool) -> Img {
    let g = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap();
    let mut f = pw(s, g("in.w"), Some(g("in.b")));
    if !simplified {
        for i in 0..depth {
            f = oracle_block(p, &format!("{prefix}.fb1.{i}"), &f, false);
        }
    }
    let mut f = zip(&oracle_cwa(p, prefix, s), &f, |a, b| a * b);
    for i in 0..depth {
        f = oracle_block(p, &format!("{prefix}.fb2.{i}"), &f, simplified);
    }
    pw(&f, g("out.w"), Some(g("out.b")))
}

/// Unclamped `I + Δ_L ⊙ Δ_R` of the two-branch model.
pub fn oracle_model(p: &ModelParams<f64>, img: &Img, depth: usize, simplified: bool) -> Img {
    let sl: Img = map_px(img, |px| oracle_luminance(px[0], px[1], px[2]).to_vec());
    let sr: Img = map_px(img, |px| oracle_reflectance(px[0], px[1], px[2]).to_vec());
    let dl = oracle_fusion(p, "lum", &sl, depth, simplified);
    let dr = oracle_fusion(p, "ref", &sr, depth, simplified);
    let mut out = img.clone();
    for (y, row) in out.iter_mut().enumerate() {
        for (x, px) in row.iter_mut().enumerate() {
            for (c, v) in px.iter_mut().enumerate() {
                *v += dl[y][x][0] * dr[y][x][c];
            }
        }
    }
    out
}

fn map_px(img: &Img, f: impl Fn(&[f64]) -> Vec<f64>) -> Img {
    img.iter().map(|r| r.iter().map(|p| f(p)).collect()).collect()
}

/// Replaces every parameter with `U(−a, a)` noise (layer-norm scales near
/// one) so no branch is silenced by a zero projection.
pub fn randomize(p: &ModelParams<f64>, seed: u64, a: f64) -> ModelParams<f64> {
    let mut r = rng(seed);
    let mut q = p.clone();
    for (name, t) in q.iter_mut() {
        let base = if name.ends_with("ln.scale") { 1.0 } else { 0.0 };
        for v in t.data_mut() {
            *v = base + r.gen_range(-a..a);
        }
    }
    q
}

// ---------------------------------------------------------------------------
// SSIM by direct sliding windows with 2-D Gaussian weights.

pub fn gray(t: &Tensor<f64>) -> Vec<Vec<f64>> {
    (0..t.height())
        .map(|y| {
            (0..t.width())
                .map(|x| 0.2126 * t.get(y, x, 0) + 0.7152 * t.get(y, x, 1) + 0.0722 * t.get(y, x, 2))
                .collect()
        })
        .collect()
}

fn window() -> Vec<Vec<f64>> {
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp()).collect();
    let mut w = vec![vec![0.0; 11]; 11];
    let mut total = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            w[i][j] = g[i] * g[j];
            total += w[i][j];
        }
    }
    w.iter().map(|r| r.iter().map(|v| v / total).collect()).collect()
}

/// `(mean SSIM, mean contrast-structure)` over all valid window positions.
pub fn oracle_ssim_cs(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, f64) {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let w = window();
    let (h, wd) = (a.len(), a[0].len());
    let (mut ssum, mut csum, mut n) = (0.0, 0.0, 0.0);
    for y in 0..=h - 11 {
        for x in 0..=wd - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    ma += w[i][j] * a[y + i][x + j];
                    mb += w[i][j] * b[y + i][x + j];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let (da, db) = (a[y + i][x + j] - ma, b[y + i][x + j] - mb);
                    va += w[i][j] * da * da;
                    vb += w[i][j] * db * db;
                    cov += w[i][j] * da * db;
                }
            }
            let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            ssum += l * cs;
            csum += cs;
            n += 1.0;
        }
    }
    (ssum / n, csum / n)
}

fn halve(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a.len() / 2)
        .map(|y| {
            (0..a[0].len() / 2)
                .map(|x| 0.25 * (a[2 * y][2 * x] + a[2 * y][2 * x + 1] + a[2 * y + 1][2 * x] + a[2 * y + 1][2 * x + 1]))
                .collect()
        })
        .collect()
}

pub fn oracle_ms_ssim(pred: &Tensor<f64>, gt: &Tensor<f64>, scales: usize) -> f64 {
    let full = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let total: f64 = if scales == 5 { 1.0 } else { full[..scales].iter().sum() };
    let (mut a, mut b) = (gray(pred), gray(gt));
    let mut out = 1.0;
    for m in 0..scales {
        let wgt = full[m] / total;
        let (s, cs) = oracle_ssim_cs(&a, &b);
        let term = if m + 1 == scales { s } else { cs };
        out *= term.max(0.0).powf(wgt);
        a = halve(&a);
        b = halve(&b);
    }
    out
}

// ---------------------------------------------------------------------------
// Acceptance reporting

pub fn verdict(id: &str, name: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    println!("criterion {id} [{}] {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    pass
}
