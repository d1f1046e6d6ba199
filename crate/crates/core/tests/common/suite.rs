//! Finite-difference cases for every differentiable primitive, the blocks
//! and the composed Nano model.

use multinex::metrics::{luma, ssim_graph};
use multinex::nn::blocks::{cwa, dsconv, msef};
use multinex::nn::ops::gaussian_kernel;
use multinex::nn::tape::{Tape, Var};
use multinex::nn::{forward, Exec, ModelParams, VariantConfig};
use multinex::train::loss::{loss_graph, LossWeights, ProjectionFeatures};
use multinex::{Result, Tensor};

use super::{grad_check, leaves, rng, uniform, uniform_avoiding, weighted_sum, Builder};

pub const PRIMITIVE_TOL: f64 = 1e-3;
pub const COMPOSED_TOL: f64 = 5e-3;
pub const SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

pub struct Case {
    pub name: &'static str,
    pub tol: f64,
    pub params: ModelParams<f64>,
    pub build: Box<Builder<'static>>,
}

fn p(t: &mut Tape<f64>, ps: &ModelParams<f64>, name: &str) -> Result<Var> {
    Ok(t.param(name, ps.get(name)?))
}

fn case(
    name: &'static str,
    tol: f64,
    params: ModelParams<f64>,
    build: impl Fn(&mut Tape<f64>, &ModelParams<f64>) -> Result<Var> + 'static,
) -> Case {
    Case {
        name,
        tol,
        params,
        build: Box::new(build),
    }
}

fn msef_leaves(prefix: &str, c: usize, d: usize, seed: u64) -> Vec<(String, Tensor<f64>)> {
    let mut r = rng(seed);
    vec![
        (format!("{prefix}.ln.scale"), uniform(&mut r, 1, 1, c, 0.5, 1.5)),
        (format!("{prefix}.ln.shift"), uniform(&mut r, 1, 1, c, -0.5, 0.5)),
        (format!("{prefix}.dw"), uniform(&mut r, 3, 3, c, -0.5, 0.5)),
        (format!("{prefix}.w1"), uniform(&mut r, d, c, 1, -0.8, 0.8)),
        (format!("{prefix}.w2"), uniform(&mut r, c, d, 1, -0.8, 0.8)),
    ]
}

pub const CASE_NAMES: [&str; 27] = [
    "conv1x1", "conv1x1_nobias", "dwconv3", "dwconv7", "layer_norm", "gap", "relu", "sigmoid", "tanh",
    "add_broadcast", "sub_broadcast", "mul_broadcast", "div_broadcast", "affine", "pow", "clamp", "blur",
    "avg_pool2", "mean", "features", "luma", "ssim", "msef", "dsconv", "cwa", "nano_model", "msssim_loss",
];

/// The named case at `seed`.
pub fn build_case(name: &str, seed: u64) -> Case {
    let mut r = rng(seed);
    let s = seed;
    match name {
        "conv1x1" => case(
            "conv1x1",
            PRIMITIVE_TOL,
            leaves(vec![
                ("x", uniform(&mut r, 4, 5, 3, -1.0, 1.0)),
                ("w", uniform(&mut r, 4, 3, 1, -1.0, 1.0)),
                ("b", uniform(&mut r, 1, 1, 4, -1.0, 1.0)),
            ]),
            move |t, ps| {
                let (x, w, b) = (p(t, ps, "x")?, p(t, ps, "w")?, p(t, ps, "b")?);
                let y = t.conv1x1(&x, &w, Some(&b))?;
                weighted_sum(t, &y, s)
            },
        ),
        "conv1x1_nobias" => case(
            "conv1x1_nobias",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 3, 3, 5, -1.0, 1.0)), ("w", uniform(&mut r, 2, 5, 1, -1.0, 1.0))]),
            move |t, ps| {
                let (x, w) = (p(t, ps, "x")?, p(t, ps, "w")?);
                let y = t.conv1x1(&x, &w, None)?;
                weighted_sum(t, &y, s)
            },
        ),
        "dwconv3" | "dwconv7" => {
            let k = if name == "dwconv3" { 3 } else { 7 };
            case(
                if k == 3 { "dwconv3" } else { "dwconv7" },
                PRIMITIVE_TOL,
                leaves(vec![("x", uniform(&mut r, 5, 8, 2, -1.0, 1.0)), ("k", uniform(&mut r, k, k, 2, -1.0, 1.0))]),
                move |t, ps| {
                    let (x, k) = (p(t, ps, "x")?, p(t, ps, "k")?);
                    let y = t.dwconv(&x, &k)?;
                    weighted_sum(t, &y, s)
                },
            )
        }
        "layer_norm" => case(
            "layer_norm",
            PRIMITIVE_TOL,
            leaves(vec![
                ("x", uniform(&mut r, 3, 4, 5, -1.0, 1.0)),
                ("g", uniform(&mut r, 1, 1, 5, 0.5, 1.5)),
                ("b", uniform(&mut r, 1, 1, 5, -0.5, 0.5)),
            ]),
            move |t, ps| {
                let (x, g, b) = (p(t, ps, "x")?, p(t, ps, "g")?, p(t, ps, "b")?);
                let y = t.layer_norm(&x, &g, &b)?;
                weighted_sum(t, &y, s)
            },
        ),
        "gap" => case(
            "gap",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 3, 4, 3, -1.0, 1.0))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = t.gap(&x);
                weighted_sum(t, &y, s)
            },
        ),
        "relu" | "sigmoid" | "tanh" => {
            let x = uniform_avoiding(&mut r, (4, 4, 3), (-2.0, 2.0), &[0.0], 1e-3);
            let name: &'static str = match name {
                "relu" => "relu",
                "sigmoid" => "sigmoid",
                _ => "tanh",
            };
            case(name, PRIMITIVE_TOL, leaves(vec![("x", x)]), move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = match name {
                    "relu" => t.relu(&x),
                    "sigmoid" => t.sigmoid(&x),
                    _ => t.tanh(&x),
                };
                weighted_sum(t, &y, s)
            })
        }
        "add_broadcast" | "sub_broadcast" | "mul_broadcast" | "div_broadcast" => {
            let name: &'static str = match name {
                "add_broadcast" => "add_broadcast",
                "sub_broadcast" => "sub_broadcast",
                "mul_broadcast" => "mul_broadcast",
                _ => "div_broadcast",
            };
            let a = uniform(&mut r, 3, 4, 3, -1.0, 1.0);
            let b = uniform(&mut r, 1, 1, 3, 0.5, 1.5);
            let c = uniform(&mut r, 3, 4, 1, 0.5, 1.5);
            case(name, PRIMITIVE_TOL, leaves(vec![("a", a), ("b", b), ("c", c)]), move |t, ps| {
                let (a, b, c) = (p(t, ps, "a")?, p(t, ps, "b")?, p(t, ps, "c")?);
                let (y1, y2) = match name {
                    "add_broadcast" => (t.add(&a, &b)?, t.add(&c, &a)?),
                    "sub_broadcast" => (t.sub(&a, &b)?, t.sub(&c, &a)?),
                    "mul_broadcast" => (t.mul(&a, &b)?, t.mul(&c, &a)?),
                    _ => (t.div(&a, &b)?, t.div(&a, &c)?),
                };
                let y = t.add(&y1, &y2)?;
                weighted_sum(t, &y, s)
            })
        }
        "affine" => case(
            "affine",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 3, 3, 2, -1.0, 1.0))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = t.affine(&x, -1.7, 0.3);
                weighted_sum(t, &y, s)
            },
        ),
        "pow" => case(
            "pow",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 3, 3, 2, 0.2, 1.2))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = t.pow(&x, 0.2363);
                weighted_sum(t, &y, s)
            },
        ),
        "clamp" => case(
            "clamp",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform_avoiding(&mut r, (4, 4, 3), (-0.2, 1.2), &[0.0, 1.0], 1e-3))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = t.clamp(&x, 0.0, 1.0);
                weighted_sum(t, &y, s)
            },
        ),
        "blur" => case(
            "blur",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 9, 12, 2, -1.0, 1.0))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = t.blur(&x, &gaussian_kernel::<f64>(5, 1.5))?;
                weighted_sum(t, &y, s)
            },
        ),
        "avg_pool2" => case(
            "avg_pool2",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 6, 8, 2, -1.0, 1.0))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = t.avg_pool2(&x)?;
                weighted_sum(t, &y, s)
            },
        ),
        "mean" => case(
            "mean",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 3, 5, 2, -1.0, 1.0))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let m = t.mean(&x);
                Ok(t.affine(&m, 3.0, 0.0))
            },
        ),
        "features" => {
            let hook = ProjectionFeatures {
                weight: uniform(&mut r, 4, 3, 1, -1.0, 1.0),
            };
            case(
                "features",
                PRIMITIVE_TOL,
                leaves(vec![("x", uniform(&mut r, 4, 4, 3, 0.0, 1.0))]),
                move |t, ps| {
                    let x = p(t, ps, "x")?;
                    let y = t.features(&hook, &x)?;
                    weighted_sum(t, &y, s)
                },
            )
        }
        "luma" => case(
            "luma",
            PRIMITIVE_TOL,
            leaves(vec![("x", uniform(&mut r, 4, 4, 3, 0.0, 1.0))]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = luma(t, &x)?;
                weighted_sum(t, &y, s)
            },
        ),
        "ssim" => {
            let gt = uniform(&mut r, 14, 13, 3, 0.0, 1.0);
            case(
                "ssim",
                PRIMITIVE_TOL,
                leaves(vec![("x", uniform(&mut r, 14, 13, 3, 0.0, 1.0))]),
                move |t, ps| {
                    let x = p(t, ps, "x")?;
                    let g = t.input(gt.clone());
                    ssim_graph(t, &x, &g)
                },
            )
        }
        "msef" => {
            let mut l = msef_leaves("m", 5, 2, seed);
            l.push(("x".into(), uniform(&mut r, 4, 5, 5, -1.0, 1.0)));
            case("msef", PRIMITIVE_TOL, ModelParams::from_entries(l).unwrap(), move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = msef(t, ps, "m", &x)?;
                weighted_sum(t, &y, s)
            })
        }
        "dsconv" => case(
            "dsconv",
            PRIMITIVE_TOL,
            leaves(vec![
                ("x", uniform(&mut r, 4, 5, 3, -1.0, 1.0)),
                ("d.dw", uniform(&mut r, 3, 3, 3, -1.0, 1.0)),
                ("d.pw.w", uniform(&mut r, 3, 3, 1, -1.0, 1.0)),
                ("d.pw.b", uniform(&mut r, 1, 1, 3, -1.0, 1.0)),
            ]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = dsconv(t, ps, "d", &x)?;
                weighted_sum(t, &y, s)
            },
        ),
        "cwa" => case(
            "cwa",
            PRIMITIVE_TOL,
            leaves(vec![
                ("x", uniform(&mut r, 8, 8, 4, 0.0, 1.0)),
                ("a.dw", uniform(&mut r, 7, 7, 4, -0.5, 0.5)),
                ("a.proj.w", uniform(&mut r, 3, 4, 1, -1.0, 1.0)),
            ]),
            move |t, ps| {
                let x = p(t, ps, "x")?;
                let y = cwa(t, ps, "a", &x)?;
                weighted_sum(t, &y, s)
            },
        ),
        "nano_model" => {
            let cfg = VariantConfig::nano();
            let params = super::randomize(&ModelParams::init(&cfg, seed).unwrap(), seed, 0.5);
            let img = uniform(&mut r, 8, 8, 3, 0.05, 0.95);
            let gt = uniform(&mut r, 8, 8, 3, 0.0, 1.0);
            let hook = ProjectionFeatures {
                weight: uniform(&mut r, 4, 3, 1, -1.0, 1.0),
            };
            case("nano_model", COMPOSED_TOL, params, move |t, ps| {
                let fwd = forward(t, ps, &cfg, &img)?;
                let g = t.input(gt.clone());
                let weights = LossWeights {
                    perc: 0.5,
                    ..LossWeights::default()
                };
                Ok(loss_graph(t, &fwd.output, &g, &weights, Some(&hook))?.total)
            })
        }
        "msssim_loss" => {
            let gt = uniform(&mut r, 24, 24, 3, 0.0, 1.0);
            let x = uniform(&mut r, 24, 24, 3, 0.1, 0.9);
            case("msssim_loss", PRIMITIVE_TOL, leaves(vec![("x", x)]), move |t, ps| {
                let x = p(t, ps, "x")?;
                let g = t.input(gt.clone());
                let weights = LossWeights {
                    msssim: 1.0,
                    ..LossWeights::default()
                };
                Ok(loss_graph(t, &x, &g, &weights, None)?.total)
            })
        }
        other => panic!("unknown gradient case {other}"),
    }
}

/// Worst relative error over all seeds, and the leaf where it occurred.
pub fn run_case(name: &str) -> (f64, f64, String) {
    let mut worst = (0.0, String::new());
    let mut tol = 0.0;
    for seed in SEEDS {
        let c = build_case(name, seed);
        tol = c.tol;
        let (e, leaf) = grad_check(&c.params, &*c.build);
        if e >= worst.0 {
            worst = (e, format!("{leaf} (seed {seed})"));
        }
    }
    (worst.0, tol, worst.1)
}
