//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation as it executes. Nodes are appended in
//! evaluation order, so the node list is already a topological order and
//! [`Graph::backward`] only has to walk it in reverse. A fresh graph is built
//! for every forward pass and dropped after the optimizer step.

mod conv;
mod gradcheck;

pub use conv::{conv_output_len, ConvGeometry, Padding};
pub use gradcheck::{finite_diff_check, finite_diff_check_at};

use crate::error::{Error, Result};
use crate::tensor::{gemm, MatRef, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    AddBias { x: Var, bias: Var },
    Conv2d { input: Var, kernels: Var, bias: Var, geom: ConvGeometry, cols: Vec<f64> },
    Reshape(Var),
    ConcatLast { a: Var, b: Var, outer: usize, a_inner: usize, b_inner: usize },
    Select { src: Var, index: usize, batch: usize, steps: usize, inner: usize },
    Stack(Vec<Var>),
    Sum(Var),
    Mse { pred: Var, target: Var },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(_) => "relu",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::MatMul { .. } => "matmul",
            Op::AddBias { .. } => "add_bias",
            Op::Conv2d { .. } => "conv2d",
            Op::Reshape(_) => "reshape",
            Op::ConcatLast { .. } => "concat_last",
            Op::Select { .. } => "select",
            Op::Stack(_) => "stack",
            Op::Sum(_) => "sum",
            Op::Mse { .. } => "mse_loss",
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
    params: Vec<Var>,
    // First op (debug builds only) that turned finite inputs into NaN/Inf.
    overflow: Option<String>,
}

/// Gradients of a scalar loss with respect to the graph's leaves.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<Var>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of a leaf; zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Gradients of every registered parameter, in registration order.
    pub fn params(&self) -> Vec<Tensor> {
        self.params.iter().map(|&p| self.wrt(p)).collect()
    }
}

fn same_shape_or_scalar(op: &str, a: &Tensor, b: &Tensor) -> Result<Vec<usize>> {
    if a.shape() == b.shape() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else if b.is_scalar() {
        Ok(a.shape().to_vec())
    } else {
        Err(Error::Config(format!(
            "{op}: incompatible shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

// Elementwise a ∘ b with scalar-vs-tensor broadcast.
fn zip_broadcast(a: &[f64], b: &[f64], len: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let x = if a.len() == 1 { a[0] } else { a[i] };
            let y = if b.len() == 1 { b[0] } else { b[i] };
            f(x, y)
        })
        .collect()
}

fn unbroadcast(grad: Vec<f64>, target_len: usize) -> Vec<f64> {
    if target_len == 1 && grad.len() != 1 {
        vec![grad.iter().sum()]
    } else {
        grad
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaves registered with [`Graph::param`], in registration order.
    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    /// A trainable leaf; its gradient is reported by [`Gradients::params`].
    pub fn param(&mut self, value: Tensor) -> Var {
        let v = self.push_leaf(value, true);
        self.params.push(v);
        v
    }

    /// A leaf that receives a gradient without being listed as a parameter.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        if cfg!(debug_assertions) && self.overflow.is_none() && !value.all_finite() {
            let inputs_finite = inputs.iter().all(|v| self.nodes[v.0].value.all_finite());
            if inputs_finite {
                self.overflow = Some(format!("node {} ({})", self.nodes.len(), op.name()));
            }
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn binary(&mut self, name: &str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = same_shape_or_scalar(name, ta, tb)?;
        let len = shape.iter().product();
        Tensor::new(&shape, zip_broadcast(ta.data(), tb.data(), len, f))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), &[a])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (&[m, k], &[k2, n]) = (ta.shape(), tb.shape()) else {
            return Err(Error::Config(format!(
                "matmul expects matrices, got {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        };
        if k != k2 {
            return Err(Error::Config(format!(
                "matmul inner dimensions differ: {:?} x {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, MatRef::rows(ta.data(), k), MatRef::rows(tb.data(), n), 0.0, &mut out);
        let out = Tensor::new(&[m, n], out)?;
        Ok(self.push(out, Op::MatMul { a, b, m, k, n }, &[a, b]))
    }

    /// `x + bias` with `bias` broadcast along every leading axis of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let n = tb.numel();
        if tb.rank() != 1 || tx.shape().last() != Some(&n) {
            return Err(Error::Config(format!(
                "add_bias: bias {:?} does not match trailing axis of {:?}",
                tb.shape(),
                tx.shape()
            )));
        }
        let mut out = tx.clone();
        for row in out.data_mut().chunks_exact_mut(n) {
            row.iter_mut().zip(tb.data()).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(out, Op::AddBias { x, bias }, &[x, bias]))
    }

    /// 2-D convolution with "same" or "valid" padding.
    ///
    /// `input` is `[n, h, w, cin]` (or `[h, w, cin]` for a single image),
    /// `kernels` is `[kh, kw, cin, cout]` and `bias` is `[cout]`.
    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var, stride: (usize, usize), padding: Padding) -> Result<Var> {
        let (ti, tk, tb) = (self.value(input), self.value(kernels), self.value(bias));
        let in4 = match *ti.shape() {
            [n, h, w, c] => [n, h, w, c],
            [h, w, c] => [1, h, w, c],
            _ => {
                return Err(Error::Config(format!(
                    "conv2d input must be [n,h,w,c] or [h,w,c], got {:?}",
                    ti.shape()
                )))
            }
        };
        let &[kh, kw, kc, cout] = tk.shape() else {
            return Err(Error::Config(format!(
                "conv2d kernels must be [kh,kw,cin,cout], got {:?}",
                tk.shape()
            )));
        };
        if tb.shape() != [cout] {
            return Err(Error::Config(format!(
                "conv2d bias {:?} does not match {cout} output channels",
                tb.shape()
            )));
        }
        let geom = ConvGeometry::new(in4, [kh, kw, kc, cout], stride, padding)?;
        let cols = conv::im2col(ti.data(), &geom);
        let rows = geom.patch_rows();
        let mut out = vec![0.0; rows * cout];
        for row in out.chunks_exact_mut(cout) {
            row.copy_from_slice(tb.data());
        }
        gemm(
            rows,
            geom.patch_cols(),
            cout,
            MatRef::rows(&cols, geom.patch_cols()),
            MatRef::rows(tk.data(), cout),
            1.0,
            &mut out,
        );
        let shape = if ti.rank() == 3 {
            vec![geom.out_h, geom.out_w, cout]
        } else {
            geom.output_shape().to_vec()
        };
        let out = Tensor::new(&shape, out)?;
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                kernels,
                bias,
                geom,
                cols,
            },
            &[input, kernels, bias],
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    /// Concatenate along the last axis; all leading axes must agree.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.is_empty() || sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::Config(format!("concat_last: incompatible shapes {sa:?} and {sb:?}")));
        }
        let a_inner = sa[sa.len() - 1];
        let b_inner = sb[sb.len() - 1];
        let outer = ta.numel() / a_inner;
        let mut data = Vec::with_capacity(ta.numel() + tb.numel());
        for (ra, rb) in ta.data().chunks_exact(a_inner).zip(tb.data().chunks_exact(b_inner)) {
            data.extend_from_slice(ra);
            data.extend_from_slice(rb);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().expect("nonempty") = a_inner + b_inner;
        let out = Tensor::new(&shape, data)?;
        Ok(self.push(out, Op::ConcatLast { a, b, outer, a_inner, b_inner }, &[a, b]))
    }

    /// Slice `[b, t, ...] -> [b, ...]` at position `index` of axis 1.
    pub fn select(&mut self, src: Var, index: usize) -> Result<Var> {
        let t = self.value(src);
        let s = t.shape();
        if s.len() < 2 || index >= s[1] {
            return Err(Error::Config(format!("select: index {index} out of range for shape {s:?}")));
        }
        let steps = s[1];
        let inner: usize = s[2..].iter().product();
        let mut data = Vec::with_capacity(s[0] * inner);
        for chunk in t.data().chunks_exact(steps * inner) {
            data.extend_from_slice(&chunk[index * inner..][..inner]);
        }
        let mut shape = vec![s[0]];
        shape.extend_from_slice(&s[2..]);
        let out = Tensor::new(&shape, data)?;
        let batch = s[0];
        Ok(self.push(out, Op::Select { src, index, batch, steps, inner }, &[src]))
    }

    /// Stack equally shaped `[b, ...]` tensors into `[b, t, ...]`.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::EmptySequence("stack of zero tensors".into()));
        };
        let s0 = self.shape(first).to_vec();
        if s0.is_empty() {
            return Err(Error::Config("stack needs tensors of rank >= 1".into()));
        }
        for &p in parts {
            if self.shape(p) != s0.as_slice() {
                return Err(Error::Config(format!(
                    "stack: shape {:?} differs from {s0:?}",
                    self.shape(p)
                )));
            }
        }
        let inner: usize = s0[1..].iter().product();
        let mut data = Vec::with_capacity(s0[0] * inner * parts.len());
        for b in 0..s0[0] {
            for &p in parts {
                data.extend_from_slice(&self.value(p).data()[b * inner..][..inner]);
            }
        }
        let mut shape = vec![s0[0], parts.len()];
        shape.extend_from_slice(&s0[1..]);
        let out = Tensor::new(&shape, data)?;
        Ok(self.push(out, Op::Stack(parts.to_vec()), parts))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(out, Op::Sum(a), &[a])
    }

    /// Mean squared error between equally sized tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.numel() != tt.numel() {
            return Err(Error::Config(format!(
                "mse_loss: prediction {:?} and target {:?} differ in length",
                tp.shape(),
                tt.shape()
            )));
        }
        let n = tp.numel();
        if n == 0 {
            return Err(Error::EmptyBatch("mse_loss over zero elements".into()));
        }
        let sq: f64 = tp.data().iter().zip(tt.data()).map(|(p, t)| (p - t) * (p - t)).sum();
        let out = Tensor::scalar(sq / n as f64);
        Ok(self.push(out, Op::Mse { pred, target }, &[pred, target]))
    }

    /// Error if a forward op produced NaN/Inf from finite inputs (tracked in debug builds).
    pub fn check_finite(&self) -> Result<()> {
        match &self.overflow {
            Some(at) => Err(Error::Numeric(format!("non-finite forward value at {at}"))),
            None => Ok(()),
        }
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check_finite()?;
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut leaf_grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(node, &g, &mut grads)?;
            if matches!(node.op, Op::Leaf) {
                leaf_grads[i] = Some(Tensor::new(node.value.shape(), g)?);
            }
        }
        Ok(Gradients {
            grads: leaf_grads,
            params: self.params.clone(),
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    // Gradient buffer of `v`, created as zeros on first use; None if `v` needs no gradient.
    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.numel()]))
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contribution: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.iter_mut().zip(&contribution).for_each(|(e, c)| *e += c),
            empty @ None => *empty = Some(contribution),
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let (na, nb) = (self.value(*a).numel(), self.value(*b).numel());
                self.accumulate(grads, *a, unbroadcast(g.to_vec(), na));
                self.accumulate(grads, *b, unbroadcast(g.to_vec(), nb));
            }
            Op::Sub(a, b) => {
                let (na, nb) = (self.value(*a).numel(), self.value(*b).numel());
                self.accumulate(grads, *a, unbroadcast(g.to_vec(), na));
                self.accumulate(grads, *b, unbroadcast(g.iter().map(|v| -v).collect(), nb));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    let d = zip_broadcast(g, tb.data(), g.len(), |gi, bi| gi * bi);
                    self.accumulate(grads, *a, unbroadcast(d, ta.numel()));
                }
                if self.requires_grad(*b) {
                    let d = zip_broadcast(g, ta.data(), g.len(), |gi, ai| gi * ai);
                    self.accumulate(grads, *b, unbroadcast(d, tb.numel()));
                }
            }
            Op::Scale(a, factor) => {
                self.accumulate(grads, *a, g.iter().map(|v| v * factor).collect());
            }
            Op::Relu(a) => {
                let d = g.iter().zip(y).map(|(gi, yi)| if *yi > 0.0 { *gi } else { 0.0 }).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let d = g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let d = g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect();
                self.accumulate(grads, *a, d);
            }
            &Op::MatMul { a, b, m, k, n } => {
                let (ta, tb) = (self.value(a).data(), self.value(b).data());
                if let Some(da) = self.slot(grads, a) {
                    // dA = dC · Bᵀ
                    gemm(m, n, k, MatRef::rows(g, n), MatRef::transposed(tb, n), 1.0, da);
                }
                if let Some(db) = self.slot(grads, b) {
                    // dB = Aᵀ · dC
                    gemm(k, m, n, MatRef::transposed(ta, k), MatRef::rows(g, n), 1.0, db);
                }
            }
            Op::AddBias { x, bias } => {
                self.accumulate(grads, *x, g.to_vec());
                if let Some(db) = self.slot(grads, *bias) {
                    let n = db.len();
                    for row in g.chunks_exact(n) {
                        db.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                    }
                }
            }
            Op::Conv2d { input, kernels, bias, geom, cols } => {
                let (rows, pc, cout) = (geom.patch_rows(), geom.patch_cols(), geom.cout);
                if let Some(dk) = self.slot(grads, *kernels) {
                    gemm(pc, rows, cout, MatRef::transposed(cols, pc), MatRef::rows(g, cout), 1.0, dk);
                }
                if let Some(db) = self.slot(grads, *bias) {
                    for row in g.chunks_exact(cout) {
                        db.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                    }
                }
                if self.requires_grad(*input) {
                    let tk = self.value(*kernels).data();
                    let mut dcols = vec![0.0; rows * pc];
                    gemm(rows, cout, pc, MatRef::rows(g, cout), MatRef::transposed(tk, cout), 0.0, &mut dcols);
                    let di = self.slot(grads, *input).expect("input requires grad");
                    conv::col2im_add(&dcols, geom, di);
                }
            }
            Op::Reshape(a) => self.accumulate(grads, *a, g.to_vec()),
            &Op::ConcatLast { a, b, outer, a_inner, b_inner } => {
                let width = a_inner + b_inner;
                if self.requires_grad(a) {
                    let mut d = Vec::with_capacity(outer * a_inner);
                    for row in g.chunks_exact(width) {
                        d.extend_from_slice(&row[..a_inner]);
                    }
                    self.accumulate(grads, a, d);
                }
                if self.requires_grad(b) {
                    let mut d = Vec::with_capacity(outer * b_inner);
                    for row in g.chunks_exact(width) {
                        d.extend_from_slice(&row[a_inner..]);
                    }
                    self.accumulate(grads, b, d);
                }
            }
            &Op::Select { src, index, batch, steps, inner } => {
                if let Some(ds) = self.slot(grads, src) {
                    for bi in 0..batch {
                        let dst = &mut ds[(bi * steps + index) * inner..][..inner];
                        dst.iter_mut().zip(&g[bi * inner..][..inner]).for_each(|(d, s)| *d += s);
                    }
                }
            }
            Op::Stack(parts) => {
                let steps = parts.len();
                let inner = self.value(parts[0]).numel() / self.value(parts[0]).shape()[0];
                let batch = g.len() / (steps * inner);
                for (t, &p) in parts.iter().enumerate() {
                    if !self.requires_grad(p) {
                        continue;
                    }
                    let mut d = Vec::with_capacity(batch * inner);
                    for bi in 0..batch {
                        d.extend_from_slice(&g[(bi * steps + t) * inner..][..inner]);
                    }
                    self.accumulate(grads, p, d);
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).numel();
                self.accumulate(grads, *a, vec![g[0]; n]);
            }
            Op::Mse { pred, target } => {
                let (tp, tt) = (self.value(*pred).data(), self.value(*target).data());
                let scale = 2.0 * g[0] / tp.len() as f64;
                let d: Vec<f64> = tp.iter().zip(tt).map(|(p, t)| scale * (p - t)).collect();
                if self.requires_grad(*target) {
                    self.accumulate(grads, *target, d.iter().map(|v| -v).collect());
                }
                self.accumulate(grads, *pred, d);
            }
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
