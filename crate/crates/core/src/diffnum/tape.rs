//! Dynamic reverse-mode tape over dense matrices.
//!
//! Every operation appends a node holding its forward value. `backward` walks
//! the nodes in reverse and returns the gradient of a `1 x 1` loss with respect
//! to every parameter (and every leaf created with [`Tape::variable`]).
//! Nodes that do not depend on a differentiable leaf are skipped.

use std::collections::HashMap;

use super::matrix::gemm_into;
use super::{Matrix, ParamId, ParamTensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    /// `x (r x c) + row (1 x c)`
    AddRow(Var, Var),
    /// `x (r x c) * row (1 x c)`
    MulRow(Var, Var),
    /// `x (r x c) * col (r x 1)`
    MulCol(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Min(Var, Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Grads {
    leaves: Vec<Option<Matrix>>,
    params: HashMap<ParamId, Matrix>,
}

impl Grads {
    /// Gradient for a parameter; `None` when the loss does not depend on it.
    pub fn param(&self, id: ParamId) -> Option<&Matrix> {
        self.params.get(&id)
    }

    /// Gradient for a leaf created with [`Tape::variable`] or [`Tape::param`].
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.leaves.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds this tape's gradient into `p.grad`.
    pub fn accumulate_into(&self, p: &mut ParamTensor) {
        if let Some(g) = self.params.get(&p.id()) {
            p.grad.add_assign(g);
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Const, false)
    }

    /// Differentiable input whose gradient is reported by [`Grads::wrt`].
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, p: &ParamTensor) -> Var {
        self.push(p.value.clone(), Op::Param(p.id()), true)
    }

    /// Copy of `v` that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    fn check_same(&self, ctx: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(ctx, format!("{sa:?}"), format!("{sb:?}")));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::shape(
                "matmul",
                format!("rhs with {} rows", sa.1),
                format!("{sb:?}"),
            ));
        }
        let value = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    fn binary(
        &mut self,
        ctx: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.check_same(ctx, a, b)?;
        let value = self.value(a).zip_map(self.value(b), f);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("min", a, b, f64::min, Op::Min(a, b))
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr != (1, sx.1) {
            return Err(Error::shape("add_row", format!("(1, {})", sx.1), format!("{sr:?}")));
        }
        let mut value = self.value(x).clone();
        let r = self.value(row).as_slice();
        for i in 0..sx.0 {
            for (v, b) in value.row_mut(i).iter_mut().zip(r) {
                *v += b;
            }
        }
        let ng = self.ng(x) || self.ng(row);
        Ok(self.push(value, Op::AddRow(x, row), ng))
    }

    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr != (1, sx.1) {
            return Err(Error::shape("mul_row", format!("(1, {})", sx.1), format!("{sr:?}")));
        }
        let mut value = self.value(x).clone();
        let r = self.value(row).as_slice();
        for i in 0..sx.0 {
            for (v, b) in value.row_mut(i).iter_mut().zip(r) {
                *v *= b;
            }
        }
        let ng = self.ng(x) || self.ng(row);
        Ok(self.push(value, Op::MulRow(x, row), ng))
    }

    pub fn mul_col(&mut self, x: Var, col: Var) -> Result<Var> {
        let (sx, sc) = (self.shape(x), self.shape(col));
        if sc != (sx.0, 1) {
            return Err(Error::shape("mul_col", format!("({}, 1)", sx.0), format!("{sc:?}")));
        }
        let mut value = self.value(x).clone();
        let c = self.value(col).as_slice();
        for (i, s) in c.iter().enumerate() {
            for v in value.row_mut(i) {
                *v *= s;
            }
        }
        let ng = self.ng(x) || self.ng(col);
        Ok(self.push(value, Op::MulCol(x, col), ng))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).map(f);
        let ng = self.ng(x);
        self.push(value, op, ng)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(x, |v| -v, Op::Neg(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v * c, Op::Scale(x, c))
    }

    /// `x + c` elementwise.
    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::Offset(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { slope * v }, Op::LeakyRelu(x, slope))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, Op::Ln(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, |v| v * v, Op::Square(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp(x, lo, hi))
    }

    /// Sum of all elements as a `1 x 1` node.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Matrix::scalar(self.value(x).sum());
        let ng = self.ng(x);
        self.push(value, Op::Sum(x), ng)
    }

    /// Mean of all elements as a `1 x 1` node.
    pub fn mean(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let value = Matrix::scalar(m.sum() / m.len().max(1) as f64);
        let ng = self.ng(x);
        self.push(value, Op::Mean(x), ng)
    }

    /// Per-row sums, `r x c -> r x 1`.
    pub fn row_sum(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let sums: Vec<f64> = (0..m.rows()).map(|i| m.row(i).iter().sum()).collect();
        let value = Matrix::from_vec(m.rows(), 1, sums);
        let ng = self.ng(x);
        self.push(value, Op::RowSum(x), ng)
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.shape(p).0).unwrap_or(0);
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Error::shape("concat", format!("{rows} rows"), format!("{:?}", self.shape(p))));
            }
        }
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hcat(&mats);
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), ng))
    }

    /// Columns `start..end` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start > end || end > c {
            return Err(Error::shape("slice_cols", format!("range within 0..{c}"), format!("{start}..{end}")));
        }
        let src = self.value(x);
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&src.row(i)[start..end]);
        }
        let value = Matrix::from_vec(r, end - start, data);
        let ng = self.ng(x);
        Ok(self.push(value, Op::Slice(x, start), ng))
    }

    /// Reverse pass from a `1 x 1` node.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {shape:?}"
            )));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Matrix>> = vec![None; n];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let keep = matches!(node.op, Op::Leaf | Op::Param(_));
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            if keep {
                grads[i] = Some(g);
            }
        }

        let mut params: HashMap<ParamId, Matrix> = HashMap::new();
        for (i, node) in self.nodes[..n].iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads[i]) {
                match params.get_mut(id) {
                    Some(acc) => acc.add_assign(g),
                    None => {
                        params.insert(*id, g.clone());
                    }
                }
            }
        }
        Ok(Grads {
            leaves: grads,
            params,
        })
    }

    fn acc(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn acc_gemm(&self, grads: &mut [Option<Matrix>], v: Var, a: &Matrix, ta: bool, b: &Matrix, tb: bool) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => gemm_into(a, ta, b, tb, existing, 1.0),
            slot => *slot = Some(a.matmul_t(ta, b, tb)),
        }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Const | Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                self.acc_gemm(grads, *a, g, false, val(*b), true);
                self.acc_gemm(grads, *b, val(*a), true, g, false);
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.ng(*a) {
                    self.acc(grads, *a, g.zip_map(val(*b), |g, y| g * y));
                }
                if self.ng(*b) {
                    self.acc(grads, *b, g.zip_map(val(*a), |g, x| g * x));
                }
            }
            Op::Div(a, b) => {
                let (x, y) = (val(*a), val(*b));
                if self.ng(*a) {
                    self.acc(grads, *a, g.zip_map(y, |g, y| g / y));
                }
                if self.ng(*b) {
                    let mut d = g.zip_map(x, |g, x| -g * x);
                    for (d, y) in d.as_mut_slice().iter_mut().zip(y.as_slice()) {
                        *d /= y * y;
                    }
                    self.acc(grads, *b, d);
                }
            }
            Op::AddRow(x, row) => {
                self.acc(grads, *x, g.clone());
                if self.ng(*row) {
                    self.acc(grads, *row, column_sums(g));
                }
            }
            Op::MulRow(x, row) => {
                let (xv, rv) = (val(*x), val(*row));
                if self.ng(*x) {
                    let mut d = g.clone();
                    for i in 0..d.rows() {
                        for (d, r) in d.row_mut(i).iter_mut().zip(rv.as_slice()) {
                            *d *= r;
                        }
                    }
                    self.acc(grads, *x, d);
                }
                if self.ng(*row) {
                    self.acc(grads, *row, column_sums(&g.zip_map(xv, |g, x| g * x)));
                }
            }
            Op::MulCol(x, col) => {
                let (xv, cv) = (val(*x), val(*col));
                if self.ng(*x) {
                    let mut d = g.clone();
                    for (i, s) in cv.as_slice().iter().enumerate() {
                        for v in d.row_mut(i) {
                            *v *= s;
                        }
                    }
                    self.acc(grads, *x, d);
                }
                if self.ng(*col) {
                    let sums: Vec<f64> = (0..g.rows())
                        .map(|i| g.row(i).iter().zip(xv.row(i)).map(|(g, x)| g * x).sum())
                        .collect();
                    self.acc(grads, *col, Matrix::from_vec(g.rows(), 1, sums));
                }
            }
            Op::Neg(x) => self.acc(grads, *x, g.map(|v| -v)),
            Op::Scale(x, c) => {
                let c = *c;
                self.acc(grads, *x, g.map(|v| v * c));
            }
            Op::Offset(x) => self.acc(grads, *x, g.clone()),
            Op::Relu(x) => {
                self.acc(grads, *x, g.zip_map(val(*x), |g, x| if x > 0.0 { g } else { 0.0 }));
            }
            Op::LeakyRelu(x, s) => {
                let s = *s;
                self.acc(grads, *x, g.zip_map(val(*x), |g, x| if x > 0.0 { g } else { s * g }));
            }
            Op::Softplus(x) => self.acc(grads, *x, g.zip_map(val(*x), |g, x| g * sigmoid(x))),
            Op::Exp(x) => self.acc(grads, *x, g.zip_map(&node.value, |g, y| g * y)),
            Op::Ln(x) => self.acc(grads, *x, g.zip_map(val(*x), |g, x| g / x)),
            Op::Square(x) => self.acc(grads, *x, g.zip_map(val(*x), |g, x| 2.0 * g * x)),
            Op::Clamp(x, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                self.acc(
                    grads,
                    *x,
                    g.zip_map(val(*x), |g, x| if x >= lo && x <= hi { g } else { 0.0 }),
                );
            }
            Op::Min(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if self.ng(*a) {
                    let mut d = g.clone();
                    for ((d, x), y) in d.as_mut_slice().iter_mut().zip(av.as_slice()).zip(bv.as_slice()) {
                        if x > y {
                            *d = 0.0;
                        }
                    }
                    self.acc(grads, *a, d);
                }
                if self.ng(*b) {
                    let mut d = g.clone();
                    for ((d, x), y) in d.as_mut_slice().iter_mut().zip(av.as_slice()).zip(bv.as_slice()) {
                        if x <= y {
                            *d = 0.0;
                        }
                    }
                    self.acc(grads, *b, d);
                }
            }
            Op::Sum(x) => {
                let (r, c) = self.shape(*x);
                self.acc(grads, *x, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(x) => {
                let (r, c) = self.shape(*x);
                let n = (r * c).max(1) as f64;
                self.acc(grads, *x, Matrix::filled(r, c, g.item() / n));
            }
            Op::RowSum(x) => {
                let (r, c) = self.shape(*x);
                let mut d = Matrix::zeros(r, c);
                for i in 0..r {
                    d.row_mut(i).fill(g.get(i, 0));
                }
                self.acc(grads, *x, d);
            }
            Op::Concat(parts) => {
                let mut start = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.ng(p) {
                        let mut d = Matrix::zeros(r, c);
                        for i in 0..r {
                            d.row_mut(i).copy_from_slice(&g.row(i)[start..start + c]);
                        }
                        self.acc(grads, p, d);
                    }
                    start += c;
                }
            }
            Op::Slice(x, start) => {
                let (r, c) = self.shape(*x);
                let w = g.cols();
                let mut d = Matrix::zeros(r, c);
                for i in 0..r {
                    d.row_mut(i)[*start..*start + w].copy_from_slice(g.row(i));
                }
                self.acc(grads, *x, d);
            }
        }
    }
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = vec![0.0; g.cols()];
    for i in 0..g.rows() {
        for (o, v) in out.iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    Matrix::row_vector(out)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
