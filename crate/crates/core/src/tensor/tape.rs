use super::kernels::{col2im3x3, conv2d_forward, fold3x3, gemm, unfold3x3};
use super::{Float, Tensor};
use crate::error::{ensure, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    Sum(usize),
    Relu(usize),
    Softmax(usize),
    Conv2d {
        input: usize,
        kernel: usize,
        bias: Option<usize>,
        cols: Vec<T>,
    },
    Unfold(usize),
    Transpose(usize),
    Reshape(usize),
    GatherRows {
        src: usize,
        index: Vec<usize>,
    },
    SliceRows {
        src: usize,
        start: usize,
    },
    ConcatRows(Vec<usize>),
    ConcatCols(usize, usize),
    Mix {
        weights: usize,
        parts: Vec<usize>,
    },
    GroupSum {
        x: usize,
        weights: usize,
    },
    L1 {
        pred: usize,
        target: usize,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Eager record of a forward pass.
///
/// Every op evaluates immediately and appends one node. Ops accept inputs
/// only by [`Var`], so nodes are always in topological order and the
/// backward sweep is a single reverse scan.
pub struct Tape<T: Float = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Float> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Only leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        ensure!(
            k == k2,
            Dimension,
            "matmul inner dimensions differ: {:?} × {:?}",
            self.value(a).shape(),
            self.value(b).shape()
        );
        let mut out = vec![T::zero(); m * n];
        gemm(
            m,
            k,
            n,
            T::one(),
            self.value(a).data(),
            (k, 1),
            self.value(b).data(),
            (n, 1),
            T::zero(),
            &mut out,
            (n, 1),
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new([m, n], out)?, Op::MatMul(a.0, b.0), rg))
    }

    /// Adds a bias vector to every row of a matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2("add_bias")?;
        let b = self.value(bias);
        ensure!(
            b.rank() == 1 && b.len() == cols,
            Dimension,
            "bias of shape {:?} does not match rows of width {cols}",
            b.shape()
        );
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_exact_mut(cols) {
            for (o, &bv) in row.iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        let rg = self.rg(&[x, bias]);
        Ok(self.push(
            Tensor::new([rows, cols], out)?,
            Op::AddBias(x.0, bias.0),
            rg,
        ))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        ensure!(
            self.value(a).shape() == self.value(b).shape(),
            Dimension,
            "{what}: shapes {:?} and {:?} differ",
            self.value(a).shape(),
            self.value(b).shape()
        );
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a.0, b.0), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a.0, b.0), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = map(self.value(a), |x| x * c);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a.0, c), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a.0), rg)
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a.0), rg)
    }

    /// Softmax over the last dimension, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let width = *x.shape().last().expect("tensors have rank >= 1");
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(width) {
            softmax_in_place(row);
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Softmax(a.0), rg))
    }

    /// 3×3 cross-correlation with zero padding 1 (spatial size preserved).
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>) -> Result<Var> {
        let (c_in, h, w) = self.value(input).dims3("conv2d input")?;
        let ks = self.value(kernel).shape().to_vec();
        ensure!(
            ks.len() == 4 && ks[2] == 3 && ks[3] == 3,
            Dimension,
            "conv2d kernel must be C_out×C_in×3×3, got {ks:?}"
        );
        ensure!(
            ks[1] == c_in,
            Dimension,
            "conv2d kernel {ks:?} expects {} input channels, input has shape {:?}",
            ks[1],
            self.value(input).shape()
        );
        let c_out = ks[0];
        if let Some(b) = bias {
            let bs = self.value(b).shape();
            ensure!(
                bs == [c_out],
                Dimension,
                "conv2d bias {bs:?} does not match {c_out} output channels"
            );
        }
        let (out, cols) = conv2d_forward(
            self.value(input).data(),
            c_in,
            h,
            w,
            self.value(kernel).data(),
            c_out,
            bias.map(|b| self.value(b).data()),
        );
        let mut inputs = vec![input, kernel];
        inputs.extend(bias);
        let rg = self.rg(&inputs);
        let cols = if rg { cols } else { Vec::new() };
        Ok(self.push(
            Tensor::new([c_out, h, w], out)?,
            Op::Conv2d {
                input: input.0,
                kernel: kernel.0,
                bias: bias.map(|b| b.0),
                cols,
            },
            rg,
        ))
    }

    /// Edge-clamped 3×3 feature unfolding: `C×H×W -> 9C×H×W`.
    pub fn unfold3x3(&mut self, a: Var) -> Result<Var> {
        let (c, h, w) = self.value(a).dims3("unfold3x3")?;
        let out = unfold3x3(self.value(a).data(), c, h, w);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new([9 * c, h, w], out)?, Op::Unfold(a.0), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.value(a).dims2("transpose")?;
        let out = transpose(self.value(a).data(), r, c);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::new([c, r], out)?, Op::Transpose(a.0), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape.to_vec())?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Reshape(a.0), rg))
    }

    /// Picks rows of a matrix by index (repetition allowed).
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let (rows, cols) = self.value(a).dims2("gather_rows")?;
        ensure!(!index.is_empty(), Dimension, "gather_rows with no indices");
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::Dimension(format!(
                "gather_rows index {bad} out of range for {rows} rows"
            )));
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(index.len() * cols);
        for &i in index {
            out.extend_from_slice(&src[i * cols..(i + 1) * cols]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(
            Tensor::new([index.len(), cols], out)?,
            Op::GatherRows {
                src: a.0,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (rows, cols) = self.value(a).dims2("slice_rows")?;
        ensure!(
            start < end && end <= rows,
            Dimension,
            "slice_rows {start}..{end} out of range for {rows} rows"
        );
        let out = self.value(a).data()[start * cols..end * cols].to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(
            Tensor::new([end - start, cols], out)?,
            Op::SliceRows { src: a.0, start },
            rg,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        ensure!(!parts.is_empty(), Dimension, "concat_rows of nothing");
        let (_, cols) = self.value(parts[0]).dims2("concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat_rows")?;
            ensure!(
                c == cols,
                Dimension,
                "concat_rows width mismatch: {:?} vs {:?}",
                self.value(parts[0]).shape(),
                self.value(p).shape()
            );
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::new([rows, cols], out)?,
            Op::ConcatRows(parts.iter().map(|v| v.0).collect()),
            rg,
        ))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.value(a).dims2("concat_cols")?;
        let (rb, cb) = self.value(b).dims2("concat_cols")?;
        ensure!(
            ra == rb,
            Dimension,
            "concat_cols row mismatch: {:?} vs {:?}",
            self.value(a).shape(),
            self.value(b).shape()
        );
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(ra * (ca + cb));
        for r in 0..ra {
            out.extend_from_slice(&da[r * ca..(r + 1) * ca]);
            out.extend_from_slice(&db[r * cb..(r + 1) * cb]);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(
            Tensor::new([ra, ca + cb], out)?,
            Op::ConcatCols(a.0, b.0),
            rg,
        ))
    }

    /// Row-wise convex mixing: `out[r] = Σ_k weights[r, k] · parts[k][r]`.
    pub fn mix(&mut self, weights: Var, parts: &[Var]) -> Result<Var> {
        let (rows, k) = self.value(weights).dims2("mix weights")?;
        ensure!(
            k == parts.len(),
            Dimension,
            "mix has {k} weight columns but {} parts",
            parts.len()
        );
        let (pr, cols) = self.value(parts[0]).dims2("mix part")?;
        for &p in parts {
            ensure!(
                self.value(p).shape() == [rows, cols] && pr == rows,
                Dimension,
                "mix part of shape {:?} does not match weights {:?}",
                self.value(p).shape(),
                self.value(weights).shape()
            );
        }
        let w = self.value(weights).data();
        let mut out = vec![T::zero(); rows * cols];
        for (j, &p) in parts.iter().enumerate() {
            let pd = self.value(p).data();
            for r in 0..rows {
                let wr = w[r * k + j];
                for c in 0..cols {
                    out[r * cols + c] += wr * pd[r * cols + c];
                }
            }
        }
        let mut inputs = vec![weights];
        inputs.extend_from_slice(parts);
        let rg = self.rg(&inputs);
        Ok(self.push(
            Tensor::new([rows, cols], out)?,
            Op::Mix {
                weights: weights.0,
                parts: parts.iter().map(|v| v.0).collect(),
            },
            rg,
        ))
    }

    /// Weighted sum over consecutive row groups:
    /// `out[q] = Σ_j weights[q, j] · x[q·G + j]` with `G = weights.cols`.
    pub fn group_weighted_sum(&mut self, x: Var, weights: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2("group_weighted_sum")?;
        let (q, g) = self.value(weights).dims2("group_weighted_sum weights")?;
        ensure!(
            q * g == rows,
            Dimension,
            "group_weighted_sum: {:?} rows do not split into groups {:?}",
            self.value(x).shape(),
            self.value(weights).shape()
        );
        let (xd, w) = (self.value(x).data(), self.value(weights).data());
        let mut out = vec![T::zero(); q * cols];
        for qi in 0..q {
            for j in 0..g {
                let wj = w[qi * g + j];
                let src = &xd[(qi * g + j) * cols..][..cols];
                for (o, &s) in out[qi * cols..(qi + 1) * cols].iter_mut().zip(src) {
                    *o += wj * s;
                }
            }
        }
        let rg = self.rg(&[x, weights]);
        Ok(self.push(
            Tensor::new([q, cols], out)?,
            Op::GroupSum {
                x: x.0,
                weights: weights.0,
            },
            rg,
        ))
    }

    /// Mean absolute error over all elements.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "l1_loss")?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let total: T = p.iter().zip(t).map(|(&a, &b)| (a - b).abs()).sum();
        let mean = total / T::of_f64(p.len() as f64);
        let rg = self.rg(&[pred, target]);
        Ok(self.push(
            Tensor::scalar(mean),
            Op::L1 {
                pred: pred.0,
                target: target.0,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar loss. Consumes the tape and returns the
    /// gradient of every gradient-requiring leaf reachable from `loss`.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>> {
        ensure!(
            loss.0 < self.nodes.len(),
            Contract,
            "loss variable is not on this tape"
        );
        ensure!(
            self.nodes[loss.0].value.len() == 1,
            Contract,
            "backward needs a scalar loss, got shape {:?}",
            self.nodes[loss.0].value.shape()
        );
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        if nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }
        let mut leaves = Vec::new();

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let mut acc = |target: usize, delta: Vec<T>| {
                if !nodes[target].requires_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(existing) => {
                        for (e, d) in existing.iter_mut().zip(delta) {
                            *e += d;
                        }
                    }
                    slot @ None => *slot = Some(delta),
                }
            };
            let val = |i: usize| &nodes[i].value;
            let rg = |i: usize| nodes[i].requires_grad;

            match &node.op {
                Op::Leaf => {
                    leaves.push((id, g));
                }
                &Op::MatMul(a, b) => {
                    let (m, k) = (val(a).shape()[0], val(a).shape()[1]);
                    let n = val(b).shape()[1];
                    if rg(a) {
                        let mut ga = vec![T::zero(); m * k];
                        gemm(m, n, k, T::one(), &g, (n, 1), val(b).data(), (1, n), T::zero(), &mut ga, (k, 1));
                        acc(a, ga);
                    }
                    if rg(b) {
                        let mut gb = vec![T::zero(); k * n];
                        gemm(k, m, n, T::one(), val(a).data(), (1, k), &g, (n, 1), T::zero(), &mut gb, (n, 1));
                        acc(b, gb);
                    }
                }
                &Op::AddBias(x, b) => {
                    if rg(b) {
                        let cols = val(b).len();
                        let mut gb = vec![T::zero(); cols];
                        for row in g.chunks_exact(cols) {
                            for (o, &v) in gb.iter_mut().zip(row) {
                                *o += v;
                            }
                        }
                        acc(b, gb);
                    }
                    acc(x, g);
                }
                &Op::Add(a, b) => {
                    if rg(b) {
                        acc(b, g.clone());
                    }
                    acc(a, g);
                }
                &Op::Mul(a, b) => {
                    if rg(a) {
                        acc(a, g.iter().zip(val(b).data()).map(|(&x, &y)| x * y).collect());
                    }
                    if rg(b) {
                        acc(b, g.iter().zip(val(a).data()).map(|(&x, &y)| x * y).collect());
                    }
                }
                &Op::Scale(a, c) => acc(a, g.iter().map(|&x| x * c).collect()),
                &Op::Sum(a) => acc(a, vec![g[0]; val(a).len()]),
                &Op::Relu(a) => acc(
                    a,
                    g.iter()
                        .zip(val(a).data())
                        .map(|(&gv, &x)| if x > T::zero() { gv } else { T::zero() })
                        .collect(),
                ),
                &Op::Softmax(a) => {
                    let y = node.value.data();
                    let width = *node.value.shape().last().unwrap();
                    let mut gx = vec![T::zero(); y.len()];
                    for ((gr, yr), out) in g
                        .chunks_exact(width)
                        .zip(y.chunks_exact(width))
                        .zip(gx.chunks_exact_mut(width))
                    {
                        let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                        for ((o, &gv), &yv) in out.iter_mut().zip(gr).zip(yr) {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(a, gx);
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    cols,
                } => {
                    let (input, kernel) = (*input, *kernel);
                    let (c_in, h, w) = val(input).dims3("conv2d")?;
                    let c_out = val(kernel).shape()[0];
                    let (hw, ck) = (h * w, c_in * 9);
                    if let Some(b) = *bias {
                        if rg(b) {
                            acc(b, g.chunks_exact(hw).map(|row| row.iter().copied().sum()).collect());
                        }
                    }
                    if rg(kernel) {
                        let mut gk = vec![T::zero(); c_out * ck];
                        gemm(c_out, hw, ck, T::one(), &g, (hw, 1), cols, (1, hw), T::zero(), &mut gk, (ck, 1));
                        acc(kernel, gk);
                    }
                    if rg(input) {
                        let mut gcols = vec![T::zero(); ck * hw];
                        gemm(ck, c_out, hw, T::one(), val(kernel).data(), (1, ck), &g, (hw, 1), T::zero(), &mut gcols, (hw, 1));
                        acc(input, col2im3x3(&gcols, c_in, h, w));
                    }
                }
                &Op::Unfold(a) => {
                    let (c, h, w) = val(a).dims3("unfold3x3")?;
                    acc(a, fold3x3(&g, c, h, w));
                }
                &Op::Transpose(a) => {
                    let (r, c) = val(a).dims2("transpose")?;
                    acc(a, transpose(&g, c, r));
                }
                &Op::Reshape(a) => acc(a, g),
                Op::GatherRows { src, index } => {
                    let src = *src;
                    if rg(src) {
                        let cols = val(src).shape()[1];
                        let mut gs = vec![T::zero(); val(src).len()];
                        for (r, &i) in index.iter().enumerate() {
                            for (o, &v) in gs[i * cols..(i + 1) * cols].iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                                *o += v;
                            }
                        }
                        acc(src, gs);
                    }
                }
                &Op::SliceRows { src, start } => {
                    if rg(src) {
                        let cols = val(src).shape()[1];
                        let mut gs = vec![T::zero(); val(src).len()];
                        gs[start * cols..start * cols + g.len()].copy_from_slice(&g);
                        acc(src, gs);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = val(p).len();
                        if rg(p) {
                            acc(p, g[offset..offset + len].to_vec());
                        }
                        offset += len;
                    }
                }
                &Op::ConcatCols(a, b) => {
                    let (rows, ca) = val(a).dims2("concat_cols")?;
                    let cb = val(b).shape()[1];
                    let (mut ga, mut gb) = (Vec::with_capacity(rows * ca), Vec::with_capacity(rows * cb));
                    for row in g.chunks_exact(ca + cb) {
                        ga.extend_from_slice(&row[..ca]);
                        gb.extend_from_slice(&row[ca..]);
                    }
                    if rg(b) {
                        acc(b, gb);
                    }
                    acc(a, ga);
                }
                Op::Mix { weights, parts } => {
                    let weights = *weights;
                    let (rows, k) = val(weights).dims2("mix")?;
                    let cols = g.len() / rows;
                    let w = val(weights).data();
                    if rg(weights) {
                        let mut gw = vec![T::zero(); rows * k];
                        for (j, &p) in parts.iter().enumerate() {
                            let pd = val(p).data();
                            for r in 0..rows {
                                let mut s = T::zero();
                                for c in 0..cols {
                                    s += g[r * cols + c] * pd[r * cols + c];
                                }
                                gw[r * k + j] = s;
                            }
                        }
                        acc(weights, gw);
                    }
                    for (j, &p) in parts.iter().enumerate() {
                        if rg(p) {
                            let mut gp = vec![T::zero(); rows * cols];
                            for r in 0..rows {
                                let wr = w[r * k + j];
                                for c in 0..cols {
                                    gp[r * cols + c] = wr * g[r * cols + c];
                                }
                            }
                            acc(p, gp);
                        }
                    }
                }
                &Op::GroupSum { x, weights } => {
                    let (q, gsz) = val(weights).dims2("group_weighted_sum")?;
                    let cols = g.len() / q;
                    let (xd, w) = (val(x).data(), val(weights).data());
                    if rg(weights) {
                        let mut gw = vec![T::zero(); q * gsz];
                        for qi in 0..q {
                            for j in 0..gsz {
                                let row = &xd[(qi * gsz + j) * cols..][..cols];
                                gw[qi * gsz + j] = row.iter().zip(&g[qi * cols..(qi + 1) * cols]).map(|(&a, &b)| a * b).sum();
                            }
                        }
                        acc(weights, gw);
                    }
                    if rg(x) {
                        let mut gx = vec![T::zero(); xd.len()];
                        for qi in 0..q {
                            for j in 0..gsz {
                                let wj = w[qi * gsz + j];
                                for (o, &gv) in gx[(qi * gsz + j) * cols..][..cols].iter_mut().zip(&g[qi * cols..(qi + 1) * cols]) {
                                    *o = wj * gv;
                                }
                            }
                        }
                        acc(x, gx);
                    }
                }
                &Op::L1 { pred, target } => {
                    let (p, t) = (val(pred).data(), val(target).data());
                    let scale = g[0] / T::of_f64(p.len() as f64);
                    let gp: Vec<T> = p
                        .iter()
                        .zip(t)
                        .map(|(&a, &b)| sign(a - b) * scale)
                        .collect();
                    if rg(target) {
                        acc(target, gp.iter().map(|&v| -v).collect());
                    }
                    acc(pred, gp);
                }
            }
        }

        let mut out: Vec<Option<Tensor<T>>> = vec![None; nodes.len()];
        for (id, g) in leaves {
            out[id] = Some(Tensor::new(nodes[id].value.shape().to_vec(), g)?);
        }
        Ok(Gradients { grads: out })
    }
}

/// Gradients of the leaves of one backward sweep.
pub struct Gradients<T: Float = f32> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Float> Gradients<T> {
    /// Gradient with respect to a leaf; `None` if the leaf does not take part
    /// in the loss or was recorded without `requires_grad`.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn sign<T: Float>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

pub(crate) fn softmax_in_place<T: Float>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v = *v / total;
    }
}

fn transpose<T: Float>(data: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

fn map<T: Float>(a: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().map(|&x| f(x)).collect(),
    }
}

fn zip_map<T: Float>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}
