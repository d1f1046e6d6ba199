//! Tensor-level reverse-mode differentiation.
//!
//! A [`Tape`] records each primitive as it is evaluated. Nodes are appended
//! in evaluation order, so the node list is already topologically sorted and
//! a single reverse sweep visits every node after all of its consumers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::nn::exec::{pow_pos, Exec};
use crate::nn::ops::{self, Binary, LayerNormCache, Unary};
use crate::tensor::{Real, Tensor};
use crate::train::loss::FeatureExtractor;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv1x1 { x: Var, w: Var, b: Option<Var> },
    DwConv { x: Var, k: Var },
    LayerNorm { x: Var, scale: Var, shift: Var, cache: LayerNormCache<T> },
    Gap { x: Var },
    Unary { x: Var, op: Unary },
    Binary { a: Var, b: Var, op: Binary },
    Affine { x: Var, a: T },
    Pow { x: Var, p: T },
    Clamp { x: Var, lo: T, hi: T },
    Blur { x: Var, taps: Vec<T> },
    AvgPool2 { x: Var },
    Mean { x: Var },
}

/// One recorded primitive: its output value, how it was produced, and
/// whether any trainable parameter lies upstream of it.
struct TapeNode<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape<T: Real> {
    nodes: Vec<TapeNode<T>>,
    params: Vec<(String, Var)>,
    param_index: HashMap<String, Var>,
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            param_index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Names of the parameters registered so far, in first-use order.
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(n, _)| n.as_str())
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = match op {
            Op::Leaf => false,
            _ => inputs.iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(TapeNode {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Reverse sweep from a scalar root. Every registered parameter gets an
    /// entry; parameters that do not influence the root receive zeros.
    pub fn backward(&self, root: Var) -> Result<HashMap<String, Tensor<T>>> {
        let grads = self.backward_all(root)?;
        Ok(self
            .params
            .iter()
            .map(|(name, v)| {
                let g = grads[v.0].clone().unwrap_or_else(|| {
                    let s = self.nodes[v.0].value.shape();
                    Tensor::zeros(s.height, s.width, s.channels)
                });
                (name.clone(), g)
            })
            .collect())
    }

    /// Gradients of the root with respect to every node (None when the node
    /// does not influence the root or needs no gradient).
    pub fn backward_all(&self, root: Var) -> Result<Vec<Option<Tensor<T>>>> {
        let root_value = &self.nodes[root.0].value;
        if root_value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got {}", root_value.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::from_shape_vec(root_value.shape(), vec![T::one()])?);

        for idx in (0..=root.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = Some(gy);
                continue;
            }
            let val = |v: Var| &self.nodes[v.0].value;
            let mut acc = |v: Var, g: Tensor<T>| accumulate(&mut grads, v, g);
            match &node.op {
                Op::Leaf => {}
                Op::Conv1x1 { x, w, b } => {
                    let (gx, gw, gb) = ops::conv1x1_backward(val(*x), val(*w), &gy, self.needs(*x));
                    if let Some(gx) = gx {
                        acc(*x, gx);
                    }
                    if self.needs(*w) {
                        acc(*w, gw);
                    }
                    if let Some(b) = b {
                        if self.needs(*b) {
                            let shape = val(*b).shape();
                            acc(*b, gb.reshape(shape)?);
                        }
                    }
                }
                Op::DwConv { x, k } => {
                    let (gx, gk) = ops::dwconv_backward(val(*x), val(*k), &gy, self.needs(*x));
                    if let Some(gx) = gx {
                        acc(*x, gx);
                    }
                    if self.needs(*k) {
                        acc(*k, gk);
                    }
                }
                Op::LayerNorm { x, scale, shift, cache } => {
                    let (gx, gs, gb) = ops::layer_norm_backward(cache, val(*scale), &gy);
                    if self.needs(*x) {
                        acc(*x, gx);
                    }
                    if self.needs(*scale) {
                        acc(*scale, gs.reshape(val(*scale).shape())?);
                    }
                    if self.needs(*shift) {
                        acc(*shift, gb.reshape(val(*shift).shape())?);
                    }
                }
                Op::Gap { x } => {
                    if self.needs(*x) {
                        acc(*x, ops::gap_backward(val(*x).shape(), &gy));
                    }
                }
                Op::Unary { x, op } => {
                    if self.needs(*x) {
                        let g = gy
                            .data()
                            .iter()
                            .zip(val(*x).data())
                            .zip(node.value.data())
                            .map(|((&g, &xi), &yi)| g * op.derivative(xi, yi))
                            .collect();
                        acc(*x, Tensor::from_shape_vec(gy.shape(), g)?);
                    }
                }
                Op::Binary { a, b, op } => {
                    let need = (self.needs(*a), self.needs(*b));
                    let (ga, gb) = ops::binary_backward(val(*a), val(*b), &gy, *op, need);
                    if let Some(ga) = ga {
                        acc(*a, ga);
                    }
                    if let Some(gb) = gb {
                        acc(*b, gb);
                    }
                }
                Op::Affine { x, a } => {
                    if self.needs(*x) {
                        acc(*x, gy.scale(*a));
                    }
                }
                Op::Pow { x, p } => {
                    if self.needs(*x) {
                        let g = gy
                            .data()
                            .iter()
                            .zip(val(*x).data())
                            .map(|(&g, &xi)| {
                                if xi > T::zero() {
                                    g * *p * xi.powf(*p - T::one())
                                } else {
                                    T::zero()
                                }
                            })
                            .collect();
                        acc(*x, Tensor::from_shape_vec(gy.shape(), g)?);
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    if self.needs(*x) {
                        let g = gy
                            .data()
                            .iter()
                            .zip(val(*x).data())
                            .map(|(&g, &xi)| if xi > *lo && xi < *hi { g } else { T::zero() })
                            .collect();
                        acc(*x, Tensor::from_shape_vec(gy.shape(), g)?);
                    }
                }
                Op::Blur { x, taps } => {
                    if self.needs(*x) {
                        acc(*x, ops::blur_valid_backward(val(*x).shape(), taps, &gy));
                    }
                }
                Op::AvgPool2 { x } => {
                    if self.needs(*x) {
                        acc(*x, ops::avg_pool2_backward(val(*x).shape(), &gy));
                    }
                }
                Op::Mean { x } => {
                    if self.needs(*x) {
                        let s = val(*x).shape();
                        let g = gy.data()[0] / T::from_usize(s.len().max(1)).unwrap();
                        acc(*x, Tensor::full(s.height, s.width, s.channels, g));
                    }
                }
            }
            grads[idx] = Some(gy);
        }
        Ok(grads)
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += *x;
            }
        }
        slot => *slot = Some(g),
    }
}

impl<T: Real> Exec<T> for Tape<T> {
    type V = Var;

    fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, &[])
    }

    fn param(&mut self, name: &str, t: &Tensor<T>) -> Var {
        if let Some(&v) = self.param_index.get(name) {
            return v;
        }
        let v = self.push(t.clone(), Op::Leaf, &[]);
        self.nodes[v.0].requires_grad = true;
        self.params.push((name.to_string(), v));
        self.param_index.insert(name.to_string(), v);
        v
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<T> {
        &self.nodes[v.0].value
    }

    fn conv1x1(&mut self, x: &Var, w: &Var, b: Option<&Var>) -> Result<Var> {
        let y = ops::conv1x1(
            &self.nodes[x.0].value,
            &self.nodes[w.0].value,
            b.map(|b| &self.nodes[b.0].value),
        )?;
        let mut inputs = vec![*x, *w];
        inputs.extend(b.copied());
        Ok(self.push(y, Op::Conv1x1 { x: *x, w: *w, b: b.copied() }, &inputs))
    }

    fn dwconv(&mut self, x: &Var, k: &Var) -> Result<Var> {
        let y = ops::dwconv(&self.nodes[x.0].value, &self.nodes[k.0].value)?;
        Ok(self.push(y, Op::DwConv { x: *x, k: *k }, &[*x, *k]))
    }

    fn layer_norm(&mut self, x: &Var, scale: &Var, shift: &Var) -> Result<Var> {
        let (y, cache) = ops::layer_norm(
            &self.nodes[x.0].value,
            &self.nodes[scale.0].value,
            &self.nodes[shift.0].value,
        )?;
        Ok(self.push(
            y,
            Op::LayerNorm {
                x: *x,
                scale: *scale,
                shift: *shift,
                cache,
            },
            &[*x, *scale, *shift],
        ))
    }

    fn gap(&mut self, x: &Var) -> Var {
        let y = ops::gap(&self.nodes[x.0].value);
        self.push(y, Op::Gap { x: *x }, &[*x])
    }

    fn unary(&mut self, x: &Var, op: Unary) -> Var {
        let y = self.nodes[x.0].value.map(|v| op.apply(v));
        self.push(y, Op::Unary { x: *x, op }, &[*x])
    }

    fn binary(&mut self, a: &Var, b: &Var, op: Binary) -> Result<Var> {
        let y = ops::binary(&self.nodes[a.0].value, &self.nodes[b.0].value, op)?;
        Ok(self.push(y, Op::Binary { a: *a, b: *b, op }, &[*a, *b]))
    }

    fn affine(&mut self, x: &Var, a: T, b: T) -> Var {
        let y = self.nodes[x.0].value.map(|v| a * v + b);
        self.push(y, Op::Affine { x: *x, a }, &[*x])
    }

    fn pow(&mut self, x: &Var, p: T) -> Var {
        let y = self.nodes[x.0].value.map(|v| pow_pos(v, p));
        self.push(y, Op::Pow { x: *x, p }, &[*x])
    }

    fn clamp(&mut self, x: &Var, lo: T, hi: T) -> Var {
        let y = self.nodes[x.0].value.clamp(lo, hi);
        self.push(y, Op::Clamp { x: *x, lo, hi }, &[*x])
    }

    fn blur(&mut self, x: &Var, taps: &[T]) -> Result<Var> {
        let y = ops::blur_valid(&self.nodes[x.0].value, taps)?;
        Ok(self.push(
            y,
            Op::Blur {
                x: *x,
                taps: taps.to_vec(),
            },
            &[*x],
        ))
    }

    fn avg_pool2(&mut self, x: &Var) -> Result<Var> {
        let y = ops::avg_pool2(&self.nodes[x.0].value)?;
        Ok(self.push(y, Op::AvgPool2 { x: *x }, &[*x]))
    }

    fn mean(&mut self, x: &Var) -> Var {
        let y = Tensor::scalar(self.nodes[x.0].value.mean());
        self.push(y, Op::Mean { x: *x }, &[*x])
    }

    fn features(&mut self, hook: &dyn FeatureExtractor<T>, x: &Var) -> Result<Var> {
        hook.extract_tape(self, x)
    }
}
