//! Reverse-mode tape.
//!
//! Every op appends a node holding its output value. [`Graph::backward`]
//! walks the tape once from a scalar root and returns gradients for every
//! leaf created with [`Graph::param`]. A graph can be differentiated once;
//! a second call fails until [`Graph::reset_backward`] is called, after
//! which the same gradients are recomputed from scratch (never summed with
//! the previous ones).

use stylecurve_core::enhancer::KnotLayout;

use crate::error::{invalid, Result};
use crate::ops::adain::{self, Codes, SIGMA_MIN};
use crate::ops::loss::{self, CosineCe};
use crate::ops::render::{self, RenderCtx};
use crate::ops::{conv, dense};
use crate::tensor::Tensor;

/// Handle to a node of one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Relu(Var),
    Add(Var, Var),
    AddScalar(Var, Var),
    MulScalar(Var, Var),
    GlobalAvgPool(Var),
    DualAdain {
        x: Var,
        codes: [Var; 4],
    },
    SigmaFromRaw(Var),
    SliceCols {
        x: Var,
        start: usize,
    },
    RenderCurves {
        u: Var,
        ctx: Box<RenderCtx>,
    },
    LabL1 {
        pred: Var,
        target: Box<Tensor>,
    },
    CosineCe {
        f: Var,
        w: Var,
        labels: Vec<usize>,
        scale: f64,
    },
    Sum(Var),
    Dot {
        x: Var,
        weights: Box<Tensor>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } | Op::Linear { x, w, b } => {
                let mut v = vec![*x, *w];
                v.extend(b);
                v
            }
            Op::Relu(x)
            | Op::GlobalAvgPool(x)
            | Op::SigmaFromRaw(x)
            | Op::Sum(x)
            | Op::SliceCols { x, .. }
            | Op::Dot { x, .. }
            | Op::RenderCurves { u: x, .. }
            | Op::LabL1 { pred: x, .. } => vec![*x],
            Op::Add(a, b) | Op::AddScalar(a, b) | Op::MulScalar(a, b) => vec![*a, *b],
            Op::DualAdain { x, codes } => {
                let mut v = vec![*x];
                v.extend(codes);
                v
            }
            Op::CosineCe { f, w, .. } => vec![*f, *w],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    differentiated: bool,
}

/// Gradients of a scalar root with respect to the graph's parameters.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the variable is not a parameter or the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Result<Var> {
        if !t.is_finite() {
            return Err(invalid("tensor contains non-finite values"));
        }
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Data that receives no gradient.
    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.leaf(t, false)
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Result<Var> {
        self.leaf(t, true)
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 >= self.nodes.len() {
            return Err(invalid(format!(
                "variable {} does not belong to this graph",
                v.0
            )));
        }
        Ok(())
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        self.check(x)?;
        self.check(w)?;
        b.map(|b| self.check(b)).transpose()?;
        let out = conv::forward(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            stride,
            pad,
        )?;
        Ok(self.push(
            out,
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            },
        ))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        self.check(x)?;
        self.check(w)?;
        b.map(|b| self.check(b)).transpose()?;
        let out = dense::forward(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(self.push(out, Op::Relu(x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(invalid(format!(
                "cannot add {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let mut out = ta.clone();
        out.add_assign(tb);
        Ok(self.push(out, Op::Add(a, b)))
    }

    fn scalar_of(&self, s: Var) -> Result<f64> {
        self.check(s)?;
        let t = self.value(s);
        if !t.is_scalar() {
            return Err(invalid(format!(
                "expected a scalar, got shape {:?}",
                t.shape()
            )));
        }
        Ok(t.data()[0])
    }

    /// `x + s` with `s` a one-element tensor.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        self.check(x)?;
        let c = self.scalar_of(s)?;
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v += c);
        Ok(self.push(out, Op::AddScalar(x, s)))
    }

    /// `x * s` with `s` a one-element tensor.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        self.check(x)?;
        let c = self.scalar_of(s)?;
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= c);
        Ok(self.push(out, Op::MulScalar(x, s)))
    }

    /// `[B, C, H, W] -> [B, C]` spatial mean.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let (b, c, h, w) = t.dims4()?;
        let n = h * w;
        let data = t
            .data()
            .chunks(n)
            .map(|p| p.iter().sum::<f64>() / n as f64)
            .collect();
        let out = Tensor::new(vec![b, c], data)?;
        Ok(self.push(out, Op::GlobalAvgPool(x)))
    }

    /// Per-channel Dual AdaIN with `[B, C]` codes `(mu_a, sigma_a, mu_b, sigma_b)`.
    pub fn dual_adain(&mut self, x: Var, codes: [Var; 4]) -> Result<Var> {
        self.check(x)?;
        for c in codes {
            self.check(c)?;
        }
        let out = adain::forward(self.value(x), &self.codes(codes))?;
        Ok(self.push(out, Op::DualAdain { x, codes }))
    }

    fn codes(&self, c: [Var; 4]) -> Codes<'_> {
        Codes {
            mu_a: self.value(c[0]),
            sigma_a: self.value(c[1]),
            mu_b: self.value(c[2]),
            sigma_b: self.value(c[3]),
        }
    }

    /// `max(1 + x, SIGMA_MIN)` elementwise.
    pub fn sigma_from_raw(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let mut out = self.value(x).clone();
        out.data_mut()
            .iter_mut()
            .for_each(|v| *v = (1.0 + *v).max(SIGMA_MIN));
        Ok(self.push(out, Op::SigmaFromRaw(x)))
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let (rows, cols) = t.dims2()?;
        if start + len > cols || len == 0 {
            return Err(invalid(format!(
                "column range {start}..{} outside 0..{cols}",
                start + len
            )));
        }
        let data = t
            .data()
            .chunks(cols)
            .flat_map(|r| r[start..start + len].iter().copied())
            .collect();
        let out = Tensor::new(vec![rows, len], data)?;
        Ok(self.push(out, Op::SliceCols { x, start }))
    }

    /// Renders `O = R + I` for each batch element from knot vectors `u: [B, total]`
    /// and constant images `[B, 3, H, W]`. The output is not clamped.
    pub fn render_curves(
        &mut self,
        u: Var,
        images: Tensor,
        layout: KnotLayout,
        depth: u32,
    ) -> Result<Var> {
        self.check(u)?;
        let ctx = RenderCtx {
            images,
            layout,
            depth,
        };
        let out = render::forward(self.value(u), &ctx)?;
        Ok(self.push(
            out,
            Op::RenderCurves {
                u,
                ctx: Box::new(ctx),
            },
        ))
    }

    /// Mean CIELab L1 distance to a constant target.
    pub fn lab_l1_loss(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        self.check(pred)?;
        let l = loss::lab_l1_forward(self.value(pred), &target)?;
        Ok(self.push(
            Tensor::scalar(l),
            Op::LabL1 {
                pred,
                target: Box::new(target),
            },
        ))
    }

    /// Mean normalized-softmax loss of embeddings `f: [B, E]` against
    /// classifier rows `w: [Q, E]`.
    pub fn cosine_softmax_loss(
        &mut self,
        f: Var,
        w: Var,
        labels: &[usize],
        scale: f64,
    ) -> Result<Var> {
        self.check(f)?;
        self.check(w)?;
        let ce = CosineCe {
            features: self.value(f),
            weights: self.value(w),
            labels,
            scale,
        };
        let (l, _) = ce.run(None)?;
        Ok(self.push(
            Tensor::scalar(l),
            Op::CosineCe {
                f,
                w,
                labels: labels.to_vec(),
                scale,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s = self.value(x).sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(x)))
    }

    /// `sum(x * weights)` for a constant weight tensor of the same shape.
    pub fn dot(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        if t.shape() != weights.shape() {
            return Err(invalid(format!(
                "dot weights {:?} do not match {:?}",
                weights.shape(),
                t.shape()
            )));
        }
        let s = t
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.push(
            Tensor::scalar(s),
            Op::Dot {
                x,
                weights: Box::new(weights),
            },
        ))
    }

    /// Allows [`Graph::backward`] to run again.
    pub fn reset_backward(&mut self) {
        self.differentiated = false;
    }

    pub fn backward(&mut self, root: Var) -> Result<Gradients> {
        self.check(root)?;
        if self.differentiated {
            return Err(invalid(
                "backward already ran on this graph; call reset_backward first",
            ));
        }
        let shape = self.value(root).shape().to_vec();
        if shape.iter().product::<usize>() != 1 {
            return Err(invalid(format!(
                "backward needs a scalar root, got shape {shape:?}"
            )));
        }
        self.differentiated = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::full(&shape, 1.0));
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backward_node(&node.op, &node.value, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, t: Tensor) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&t),
            slot => *slot = Some(t),
        }
    }

    fn backward_node(
        &self,
        op: &Op,
        out: &Tensor,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        match op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            } => {
                let need_b = b.is_some_and(|b| self.needs(b));
                let r = conv::backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    *stride,
                    *pad,
                    [self.needs(*x), self.needs(*w), need_b],
                )?;
                if let Some(dx) = r.dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = r.dw {
                    self.accumulate(grads, *w, dw);
                }
                if let (Some(b), Some(db)) = (b, r.db) {
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Linear { x, w, b } => {
                let need_b = b.is_some_and(|b| self.needs(b));
                let (dx, dw, db) = dense::backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    [self.needs(*x), self.needs(*w), need_b],
                )?;
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
                if let (Some(b), Some(db)) = (b, db) {
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Relu(x) => {
                let mut d = g.clone();
                for (dv, o) in d.data_mut().iter_mut().zip(out.data()) {
                    if *o <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddScalar(x, s) => {
                self.accumulate(grads, *x, g.clone());
                self.accumulate(grads, *s, Tensor::scalar(g.sum()));
            }
            Op::MulScalar(x, s) => {
                let c = self.value(*s).data()[0];
                if self.needs(*x) {
                    let mut d = g.clone();
                    d.data_mut().iter_mut().for_each(|v| *v *= c);
                    self.accumulate(grads, *x, d);
                }
                let ds = g
                    .data()
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(a, b)| a * b)
                    .sum();
                self.accumulate(grads, *s, Tensor::scalar(ds));
            }
            Op::GlobalAvgPool(x) => {
                let shape = self.value(*x).shape().to_vec();
                let n = shape[2] * shape[3];
                let mut d = Tensor::zeros(&shape);
                for (plane, gv) in d.data_mut().chunks_mut(n).zip(g.data()) {
                    plane.fill(gv / n as f64);
                }
                self.accumulate(grads, *x, d);
            }
            Op::DualAdain { x, codes } => {
                let d = adain::backward(self.value(*x), &self.codes(*codes), g)?;
                let targets = [*x, codes[0], codes[1], codes[2], codes[3]];
                for (v, t) in targets.into_iter().zip(d) {
                    self.accumulate(grads, v, t);
                }
            }
            Op::SigmaFromRaw(x) => {
                let mut d = g.clone();
                for (dv, xv) in d.data_mut().iter_mut().zip(self.value(*x).data()) {
                    if !(1.0 + xv > SIGMA_MIN) {
                        *dv = 0.0;
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::SliceCols { x, start } => {
                let shape = self.value(*x).shape().to_vec();
                let len = g.shape()[1];
                let mut d = Tensor::zeros(&shape);
                for (row, gr) in d.data_mut().chunks_mut(shape[1]).zip(g.data().chunks(len)) {
                    row[*start..*start + len].copy_from_slice(gr);
                }
                self.accumulate(grads, *x, d);
            }
            Op::RenderCurves { u, ctx } => {
                let du = render::backward(self.value(*u), ctx, g)?;
                self.accumulate(grads, *u, du);
            }
            Op::LabL1 { pred, target } => {
                let d = loss::lab_l1_backward(self.value(*pred), target, g.data()[0])?;
                self.accumulate(grads, *pred, d);
            }
            Op::CosineCe {
                f,
                w,
                labels,
                scale,
            } => {
                let ce = CosineCe {
                    features: self.value(*f),
                    weights: self.value(*w),
                    labels,
                    scale: *scale,
                };
                let (_, d) = ce.run(Some(g.data()[0]))?;
                let (df, dw) = d.expect("gradients requested");
                self.accumulate(grads, *f, df);
                self.accumulate(grads, *w, dw);
            }
            Op::Sum(x) => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, Tensor::full(&shape, g.data()[0]));
            }
            Op::Dot { x, weights } => {
                let mut d = (**weights).clone();
                let c = g.data()[0];
                d.data_mut().iter_mut().for_each(|v| *v *= c);
                self.accumulate(grads, *x, d);
            }
        }
        Ok(())
    }
}
