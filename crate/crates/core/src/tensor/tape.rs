//! Tape-based reverse-mode automatic differentiation.
//!
//! Every op appends a node holding its forward value; [`Tape::backward`] walks
//! the nodes in reverse and accumulates gradients into every node that depends
//! on a leaf created with `requires_grad = true`. Most ops work on 2-D tensors
//! laid out as `[rows, cols]`, with rows indexing nodes, edges or triplets.

use std::rc::Rc;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    RowBlock(Var, usize),
    Gather(Var, Rc<[usize]>),
    SegmentSum(Var, Rc<[usize]>),
    SegmentSoftmax(Var, Rc<[usize]>, usize),
    Swish(Var),
    LeakyRelu(Var, f64),
    Mean(Var),
    Reshape(Var),
    SmoothL1 { pred: Var, target: f64, beta: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

fn swish_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// `0.5 x² / beta` for `|x| < beta`, else `|x| - 0.5 beta`, with `x = pred - target`.
pub(crate) fn smooth_l1_value(pred: f64, target: f64, beta: f64) -> f64 {
    let x = pred - target;
    if x.abs() < beta {
        0.5 * x * x / beta
    } else {
        x.abs() - 0.5 * beta
    }
}

fn smooth_l1_grad(pred: f64, target: f64, beta: f64) -> f64 {
    let x = pred - target;
    if x.abs() < beta {
        x / beta
    } else {
        x.signum()
    }
}

fn check_indices(op: &'static str, idx: &[usize], bound: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= bound) {
        Some(&bad) => Err(Error::IndexOutOfRange {
            what: op,
            index: bad,
            len: bound,
        }),
        None => Ok(()),
    }
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
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

    /// Records an input. Gradients are only propagated towards leaves with
    /// `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// `[n, k] x [k, m] -> [n, m]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.value(a).dims2("matmul")?;
        let (k2, m) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{n}, {k}] x [{k2}, {m}]")));
        }
        let mut out = vec![0.0; n * m];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, n, k, m);
        self.push("matmul", Tensor::new(vec![n, m], out)?, Op::MatMul(a, b), &[a, b])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let va = self.value(a);
        let data = va.data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    /// Adds a bias of `m` values to every row of `[n, m]`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (n, m) = self.value(a).dims2("add_row")?;
        if self.value(bias).len() != m {
            return Err(Error::shape(
                "add_row",
                format!("bias of {} values for {m} columns", self.value(bias).len()),
            ));
        }
        let b = self.value(bias).data();
        let data = self
            .value(a)
            .data()
            .chunks(m.max(1))
            .flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y))
            .collect();
        self.push("add_row", Tensor::new(vec![n, m], data)?, Op::AddRow(a, bias), &[a, bias])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let va = self.value(a);
        let data = va.data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let va = self.value(a);
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * c).collect())?;
        self.push("scale", value, Op::Scale(a, c), &[a])
    }

    /// Concatenation of 2-D tensors along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let (n, _) = self.value(first).dims2("concat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat")?;
            if r != n {
                return Err(Error::shape("concat", format!("row counts {n} vs {r}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        self.push(
            "concat",
            Tensor::new(vec![n, total], data)?,
            Op::Concat(parts.to_vec()),
            parts,
        )
    }

    /// Rows `start..end` of a 2-D tensor.
    pub fn row_block(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (n, c) = self.value(a).dims2("row_block")?;
        if start > end || end > n {
            return Err(Error::shape("row_block", format!("rows {start}..{end} of {n}")));
        }
        let data = self.value(a).data()[start * c..end * c].to_vec();
        self.push(
            "row_block",
            Tensor::new(vec![end - start, c], data)?,
            Op::RowBlock(a, start),
            &[a],
        )
    }

    /// Output row `r` is input row `index[r]`.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var> {
        let (n, c) = self.value(a).dims2("gather_rows")?;
        check_indices("gather_rows", &index, n)?;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            data.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let value = Tensor::new(vec![index.len(), c], data)?;
        self.push("gather_rows", value, Op::Gather(a, index), &[a])
    }

    /// Scatter-add of input row `r` into output row `segments[r]`, accumulated
    /// in input order.
    pub fn segment_sum(&mut self, a: Var, segments: Rc<[usize]>, num_segments: usize) -> Result<Var> {
        let (r, c) = self.value(a).dims2("segment_sum")?;
        if segments.len() != r {
            return Err(Error::shape(
                "segment_sum",
                format!("{} segment ids for {r} rows", segments.len()),
            ));
        }
        check_indices("segment_sum", &segments, num_segments)?;
        let src = self.value(a).data();
        let mut out = vec![0.0; num_segments * c];
        for (row, &s) in segments.iter().enumerate() {
            let dst = &mut out[s * c..(s + 1) * c];
            for (o, v) in dst.iter_mut().zip(&src[row * c..(row + 1) * c]) {
                *o += v;
            }
        }
        let value = Tensor::new(vec![num_segments, c], out)?;
        self.push("segment_sum", value, Op::SegmentSum(a, segments), &[a])
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(
        &mut self,
        a: Var,
        segments: Rc<[usize]>,
        num_segments: usize,
    ) -> Result<Var> {
        let (r, c) = self.value(a).dims2("segment_softmax")?;
        if segments.len() != r {
            return Err(Error::shape(
                "segment_softmax",
                format!("{} segment ids for {r} rows", segments.len()),
            ));
        }
        check_indices("segment_softmax", &segments, num_segments)?;
        let x = self.value(a).data();
        let mut max = vec![f64::NEG_INFINITY; num_segments * c];
        for (row, &s) in segments.iter().enumerate() {
            for j in 0..c {
                let m = &mut max[s * c + j];
                *m = m.max(x[row * c + j]);
            }
        }
        let mut out = vec![0.0; r * c];
        let mut denom = vec![0.0; num_segments * c];
        for (row, &s) in segments.iter().enumerate() {
            for j in 0..c {
                let e = (x[row * c + j] - max[s * c + j]).exp();
                out[row * c + j] = e;
                denom[s * c + j] += e;
            }
        }
        for (row, &s) in segments.iter().enumerate() {
            for j in 0..c {
                out[row * c + j] /= denom[s * c + j];
            }
        }
        let value = Tensor::new(vec![r, c], out)?;
        self.push(
            "segment_softmax",
            value,
            Op::SegmentSoftmax(a, segments, num_segments),
            &[a],
        )
    }

    /// `x * sigmoid(x)`
    pub fn swish(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|&x| swish(x)).collect())?;
        self.push("swish", value, Op::Swish(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        self.push("leaky_relu", value, Op::LeakyRelu(a, slope), &[a])
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.is_empty() {
            return Err(Error::shape("mean", "mean of an empty tensor"));
        }
        let m = va.data().iter().sum::<f64>() / va.len() as f64;
        self.push("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let data = self.value(a).data().to_vec();
        let value = Tensor::new(shape, data).map_err(|e| match e {
            Error::Shape { msg, .. } => Error::shape("reshape", msg),
            other => other,
        })?;
        self.push("reshape", value, Op::Reshape(a), &[a])
    }

    /// Smooth L1 loss of a scalar prediction against a fixed target.
    pub fn smooth_l1(&mut self, pred: Var, target: f64, beta: f64) -> Result<Var> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("smooth L1 beta must be positive, got {beta}")));
        }
        if !target.is_finite() {
            return Err(Error::NonFinite { op: "smooth_l1" });
        }
        let vp = self.value(pred);
        if vp.len() != 1 {
            return Err(Error::shape("smooth_l1", format!("prediction shape {:?}", vp.shape())));
        }
        let loss = smooth_l1_value(vp.item(), target, beta);
        self.push(
            "smooth_l1",
            Tensor::scalar(loss),
            Op::SmoothL1 { pred, target, beta },
            &[pred],
        )
    }

    /// Reverse pass from a single-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("output must be a single value, got shape {:?}", out.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::new(out.shape().to_vec(), vec![1.0])?);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.needs(v) {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.value(v).shape().to_vec()));
        f(slot.data_mut());
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let va = self.value(*a);
                let vb = self.value(*b);
                let (n, k) = (va.shape()[0], va.shape()[1]);
                let m = vb.shape()[1];
                self.accumulate(grads, *a, |da| {
                    // dA = dC B^T
                    for i in 0..n {
                        let grow = &gd[i * m..(i + 1) * m];
                        for p in 0..k {
                            let brow = &vb.data()[p * m..(p + 1) * m];
                            da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                self.accumulate(grads, *b, |db| {
                    // dB = A^T dC
                    for i in 0..n {
                        let grow = &gd[i * m..(i + 1) * m];
                        for p in 0..k {
                            let aip = va.data()[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for (d, x) in db[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                *d += aip * x;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    self.accumulate(grads, *v, |d| d.iter_mut().zip(gd).for_each(|(x, y)| *x += y));
                }
            }
            Op::AddRow(a, bias) => {
                self.accumulate(grads, *a, |d| d.iter_mut().zip(gd).for_each(|(x, y)| *x += y));
                let m = self.value(*bias).len();
                self.accumulate(grads, *bias, |d| {
                    for row in gd.chunks(m.max(1)) {
                        d.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |d| {
                    for ((x, gv), o) in d.iter_mut().zip(gd).zip(vb) {
                        *x += gv * o;
                    }
                });
                self.accumulate(grads, *b, |d| {
                    for ((x, gv), o) in d.iter_mut().zip(gd).zip(va) {
                        *x += gv * o;
                    }
                });
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, |d| d.iter_mut().zip(gd).for_each(|(x, y)| *x += c * y));
            }
            Op::Concat(parts) => {
                let (n, total) = (g.shape()[0], g.shape()[1]);
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).shape()[1];
                    self.accumulate(grads, *p, |d| {
                        for i in 0..n {
                            let src = &gd[i * total + offset..i * total + offset + w];
                            d[i * w..(i + 1) * w].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                        }
                    });
                    offset += w;
                }
            }
            Op::RowBlock(a, start) => {
                let c = self.value(*a).shape()[1];
                self.accumulate(grads, *a, |d| {
                    d[start * c..start * c + gd.len()]
                        .iter_mut()
                        .zip(gd)
                        .for_each(|(x, y)| *x += y);
                });
            }
            Op::Gather(a, index) => {
                let c = self.value(*a).shape()[1];
                self.accumulate(grads, *a, |d| {
                    for (r, &i) in index.iter().enumerate() {
                        d[i * c..(i + 1) * c]
                            .iter_mut()
                            .zip(&gd[r * c..(r + 1) * c])
                            .for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SegmentSum(a, segments) => {
                let c = self.value(*a).shape()[1];
                self.accumulate(grads, *a, |d| {
                    for (r, &s) in segments.iter().enumerate() {
                        d[r * c..(r + 1) * c]
                            .iter_mut()
                            .zip(&gd[s * c..(s + 1) * c])
                            .for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SegmentSoftmax(a, segments, num_segments) => {
                let c = node.value.shape()[1];
                let s = node.value.data();
                let mut dot = vec![0.0; num_segments * c];
                for (r, &seg) in segments.iter().enumerate() {
                    for j in 0..c {
                        dot[seg * c + j] += gd[r * c + j] * s[r * c + j];
                    }
                }
                self.accumulate(grads, *a, |d| {
                    for (r, &seg) in segments.iter().enumerate() {
                        for j in 0..c {
                            let k = r * c + j;
                            d[k] += s[k] * (gd[k] - dot[seg * c + j]);
                        }
                    }
                });
            }
            Op::Swish(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |d| {
                    for ((dv, gv), xv) in d.iter_mut().zip(gd).zip(x) {
                        *dv += gv * swish_grad(*xv);
                    }
                });
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |d| {
                    for ((dv, gv), xv) in d.iter_mut().zip(gd).zip(x) {
                        *dv += if *xv > 0.0 { *gv } else { slope * gv };
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                let share = gd[0] / n;
                self.accumulate(grads, *a, |d| d.iter_mut().for_each(|x| *x += share));
            }
            Op::Reshape(a) => {
                self.accumulate(grads, *a, |d| d.iter_mut().zip(gd).for_each(|(x, y)| *x += y));
            }
            Op::SmoothL1 { pred, target, beta } => {
                let p = self.value(*pred).item();
                let gp = gd[0] * smooth_l1_grad(p, *target, *beta);
                self.accumulate(grads, *pred, |d| d[0] += gp);
            }
        }
    }
}
