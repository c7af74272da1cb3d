//! Reverse-mode differentiation over an append-only tape.
//!
//! Forward calls record one node per operation; `backward` replays the tape
//! in reverse, accumulating adjoints into every node that transitively
//! depends on a `requires_grad` leaf. A tape drives exactly one backward
//! pass; reuse is an error.

use crate::error::{Error, Result};
use crate::num::{c, Real};

use super::ops;
use super::tensor::Tensor;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var),
    Shift(Var),
    Recip(Var),
    Relu(Var),
    Tanh(Var),
    Square(Var),
    Sum(Var),
    Dot(Var, Var),
    BiasAdd(Var, Var),
    Conv2d(Var, Var),
    ChannelsToRows(Var),
    L2NormRows(Var),
    GatherRow(Var, usize),
    PairSqDistWithin(Var, Vec<usize>),
    PairSqDistBetween(Var, Vec<usize>, Vec<usize>),
    PairOneMinusDotWithin(Var, Vec<usize>),
    PairOnePlusDotBetween(Var, Vec<usize>, Vec<usize>),
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op,
    // Scalar operand for Scale/Shift.
    k: T,
    needs_grad: bool,
}

pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

/// Adjoints produced by one backward pass, queryable per leaf.
pub struct Gradients<T: Real> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to a `requires_grad` leaf.
    /// Leaves the loss never reached hold zeros.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn all_finite(&self) -> bool {
        self.grads
            .iter()
            .flatten()
            .all(|t| t.data().iter().all(|v| v.is_finite()))
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Registers an input; gradient is tracked iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        let needs = t.requires_grad();
        self.push(t, Op::Leaf, T::zero(), needs)
    }

    /// Registers a constant input (never differentiated).
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, T::zero(), false)
    }

    pub fn scalar_constant(&mut self, v: T) -> Var {
        self.constant(Tensor::scalar(v))
    }

    fn push(&mut self, value: Tensor<T>, op: Op, k: T, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, k, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, name: &'static str, parent: Var, value: Tensor<T>, op: Op) -> Result<Var> {
        value.check_finite(name)?;
        let needs = self.nodes[parent.0].needs_grad;
        Ok(self.push(value, op, T::zero(), needs))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, value: Tensor<T>, op: Op) -> Result<Var> {
        value.check_finite(name)?;
        let needs = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(value, op, T::zero(), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::add(self.value(a), self.value(b))?;
        self.binary("add", a, b, v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::sub(self.value(a), self.value(b))?;
        self.binary("sub", a, b, v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::mul(self.value(a), self.value(b))?;
        self.binary("mul", a, b, v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Result<Var> {
        let v = ops::scale(self.value(a), k)?;
        v.check_finite("scale")?;
        let needs = self.nodes[a.0].needs_grad;
        Ok(self.push(v, Op::Scale(a), k, needs))
    }

    pub fn shift(&mut self, a: Var, k: T) -> Result<Var> {
        let v = ops::shift(self.value(a), k)?;
        v.check_finite("shift")?;
        let needs = self.nodes[a.0].needs_grad;
        Ok(self.push(v, Op::Shift(a), k, needs))
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        let v = ops::recip(self.value(a))?;
        self.unary("recip", a, v, Op::Recip(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = ops::relu(self.value(a))?;
        self.unary("relu", a, v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = ops::tanh(self.value(a))?;
        self.unary("tanh", a, v, Op::Tanh(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let v = ops::square(self.value(a))?;
        self.unary("square", a, v, Op::Square(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = ops::sum(self.value(a))?;
        self.unary("sum", a, v, Op::Sum(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::dot(self.value(a), self.value(b))?;
        self.binary("dot", a, b, v, Op::Dot(a, b))
    }

    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var> {
        let v = ops::bias_add(self.value(x), self.value(b))?;
        self.binary("bias_add", x, b, v, Op::BiasAdd(x, b))
    }

    pub fn conv2d(&mut self, x: Var, w: Var) -> Result<Var> {
        let v = ops::conv2d(self.value(x), self.value(w))?;
        self.binary("conv2d", x, w, v, Op::Conv2d(x, w))
    }

    pub fn channels_to_rows(&mut self, x: Var) -> Result<Var> {
        let v = ops::channels_to_rows(self.value(x))?;
        self.unary("channels_to_rows", x, v, Op::ChannelsToRows(x))
    }

    pub fn l2norm_rows(&mut self, x: Var) -> Result<Var> {
        let v = ops::l2norm_rows(self.value(x))?;
        self.unary("l2norm_rows", x, v, Op::L2NormRows(x))
    }

    pub fn gather_row(&mut self, m: Var, row: usize) -> Result<Var> {
        let v = ops::gather_row(self.value(m), row)?;
        self.unary("gather_row", m, v, Op::GatherRow(m, row))
    }

    pub fn pair_sqdist_within(&mut self, m: Var, rows: Vec<usize>) -> Result<Var> {
        let v = ops::pair_sqdist_within(self.value(m), &rows)?;
        self.unary("pair_sqdist_within", m, v, Op::PairSqDistWithin(m, rows))
    }

    pub fn pair_sqdist_between(&mut self, m: Var, left: Vec<usize>, right: Vec<usize>) -> Result<Var> {
        let v = ops::pair_sqdist_between(self.value(m), &left, &right)?;
        self.unary("pair_sqdist_between", m, v, Op::PairSqDistBetween(m, left, right))
    }

    pub fn pair_one_minus_dot_within(&mut self, m: Var, rows: Vec<usize>) -> Result<Var> {
        let v = ops::pair_one_minus_dot_within(self.value(m), &rows)?;
        self.unary("pair_one_minus_dot_within", m, v, Op::PairOneMinusDotWithin(m, rows))
    }

    pub fn pair_one_plus_dot_between(&mut self, m: Var, left: Vec<usize>, right: Vec<usize>) -> Result<Var> {
        let v = ops::pair_one_plus_dot_between(self.value(m), &left, &right)?;
        self.unary("pair_one_plus_dot_between", m, v, Op::PairOnePlusDotBetween(m, left, right))
    }

    /// Reverse pass from a scalar loss. Consumes the tape's single backward
    /// budget; a second call is an error.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        self.consumed = true;
        let loss_node = &self.nodes[loss.0];
        if !loss_node.value.is_scalar() {
            return Err(Error::NonScalarLoss { shape: loss_node.value.shape().to_vec() });
        }

        let mut adj: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].needs_grad {
            adj[loss.0] = Some(vec![T::one()]);
        }

        for id in (0..=loss.0).rev() {
            let g = match adj[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(id, &g, &mut adj);
            if matches!(self.nodes[id].op, Op::Leaf) {
                adj[id] = Some(g); // keep leaf adjoints for the result
            }
        }

        let grads = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if matches!(n.op, Op::Leaf) && n.needs_grad {
                    let data = adj[i].take().unwrap_or_else(|| vec![T::zero(); n.value.numel()]);
                    Some(Tensor::new(n.value.shape().to_vec(), data).expect("adjoint shape"))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, adj: &mut [Option<Vec<T>>], parent: Var, f: impl FnOnce(&mut [T])) {
        if !self.nodes[parent.0].needs_grad {
            return;
        }
        let buf = adj[parent.0].get_or_insert_with(|| vec![T::zero(); self.nodes[parent.0].value.numel()]);
        f(buf);
    }

    fn propagate(&self, id: usize, g: &[T], adj: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[id];
        let two = c::<T>(2.0);
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(adj, *a, |buf| add_into(buf, g, T::one()));
                self.accumulate(adj, *b, |buf| add_into(buf, g, T::one()));
            }
            Op::Sub(a, b) => {
                self.accumulate(adj, *a, |buf| add_into(buf, g, T::one()));
                self.accumulate(adj, *b, |buf| add_into(buf, g, -T::one()));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(adj, *a, |buf| {
                    for ((o, &gi), &bi) in buf.iter_mut().zip(g).zip(bv) {
                        *o = *o + gi * bi;
                    }
                });
                self.accumulate(adj, *b, |buf| {
                    for ((o, &gi), &ai) in buf.iter_mut().zip(g).zip(av) {
                        *o = *o + gi * ai;
                    }
                });
            }
            Op::Scale(a) => {
                let k = node.k;
                self.accumulate(adj, *a, |buf| add_into(buf, g, k));
            }
            Op::Shift(a) => {
                self.accumulate(adj, *a, |buf| add_into(buf, g, T::one()));
            }
            Op::Recip(a) => {
                let av = self.value(*a).data();
                self.accumulate(adj, *a, |buf| {
                    for ((o, &gi), &ai) in buf.iter_mut().zip(g).zip(av) {
                        *o = *o - gi / (ai * ai);
                    }
                });
            }
            Op::Relu(a) => {
                let av = self.value(*a).data();
                self.accumulate(adj, *a, |buf| {
                    for ((o, &gi), &ai) in buf.iter_mut().zip(g).zip(av) {
                        if ai > T::zero() {
                            *o = *o + gi;
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let yv = node.value.data();
                self.accumulate(adj, *a, |buf| {
                    for ((o, &gi), &yi) in buf.iter_mut().zip(g).zip(yv) {
                        *o = *o + gi * (T::one() - yi * yi);
                    }
                });
            }
            Op::Square(a) => {
                let av = self.value(*a).data();
                self.accumulate(adj, *a, |buf| {
                    for ((o, &gi), &ai) in buf.iter_mut().zip(g).zip(av) {
                        *o = *o + two * ai * gi;
                    }
                });
            }
            Op::Sum(a) => {
                let g0 = g[0];
                self.accumulate(adj, *a, |buf| {
                    for o in buf.iter_mut() {
                        *o = *o + g0;
                    }
                });
            }
            Op::Dot(a, b) => {
                let g0 = g[0];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(adj, *a, |buf| add_into(buf, bv, g0));
                self.accumulate(adj, *b, |buf| add_into(buf, av, g0));
            }
            Op::BiasAdd(x, b) => {
                let shape = self.value(*x).shape();
                let plane = shape[1] * shape[2];
                self.accumulate(adj, *x, |buf| add_into(buf, g, T::one()));
                self.accumulate(adj, *b, |buf| {
                    for (ch, o) in buf.iter_mut().enumerate() {
                        let mut s = T::zero();
                        for &gi in &g[ch * plane..(ch + 1) * plane] {
                            s = s + gi;
                        }
                        *o = *o + s;
                    }
                });
            }
            Op::Conv2d(x, w) => self.conv2d_backward(*x, *w, g, adj),
            Op::ChannelsToRows(x) => {
                let shape = self.value(*x).shape();
                let (cdim, plane) = (shape[0], shape[1] * shape[2]);
                self.accumulate(adj, *x, |buf| {
                    for ch in 0..cdim {
                        for p in 0..plane {
                            buf[ch * plane + p] = buf[ch * plane + p] + g[p * cdim + ch];
                        }
                    }
                });
            }
            Op::L2NormRows(a) => {
                let av = self.value(*a).data();
                let yv = node.value.data();
                let d = self.value(*a).shape()[1];
                let n = self.value(*a).shape()[0];
                self.accumulate(adj, *a, |buf| {
                    for r in 0..n {
                        let x = &av[r * d..(r + 1) * d];
                        let mut sq = T::zero();
                        for &v in x {
                            sq = sq + v * v;
                        }
                        if sq <= T::zero() {
                            continue; // zero row: zero subgradient
                        }
                        let inv_norm = sq.sqrt().recip();
                        let u = &yv[r * d..(r + 1) * d];
                        let gr = &g[r * d..(r + 1) * d];
                        let mut gu = T::zero();
                        for (&gi, &ui) in gr.iter().zip(u) {
                            gu = gu + gi * ui;
                        }
                        let out = &mut buf[r * d..(r + 1) * d];
                        for ((o, &gi), &ui) in out.iter_mut().zip(gr).zip(u) {
                            *o = *o + (gi - gu * ui) * inv_norm;
                        }
                    }
                });
            }
            Op::GatherRow(m, row) => {
                let d = node.value.numel();
                let row = *row;
                self.accumulate(adj, *m, |buf| {
                    add_into(&mut buf[row * d..(row + 1) * d], g, T::one());
                });
            }
            Op::PairSqDistWithin(m, rows) => {
                let md = self.value(*m).data();
                let d = self.value(*m).shape()[1];
                let g0 = g[0];
                self.accumulate(adj, *m, |buf| {
                    for i in 0..rows.len() {
                        for j in (i + 1)..rows.len() {
                            pair_sqdist_adjoint(buf, md, d, rows[i], rows[j], two * g0);
                        }
                    }
                });
            }
            Op::PairSqDistBetween(m, left, right) => {
                let md = self.value(*m).data();
                let d = self.value(*m).shape()[1];
                let g0 = g[0];
                self.accumulate(adj, *m, |buf| {
                    for &i in left {
                        for &j in right {
                            pair_sqdist_adjoint(buf, md, d, i, j, two * g0);
                        }
                    }
                });
            }
            Op::PairOneMinusDotWithin(m, rows) => {
                let md = self.value(*m).data();
                let d = self.value(*m).shape()[1];
                let g0 = g[0];
                self.accumulate(adj, *m, |buf| {
                    for i in 0..rows.len() {
                        for j in (i + 1)..rows.len() {
                            pair_dot_adjoint(buf, md, d, rows[i], rows[j], -g0);
                        }
                    }
                });
            }
            Op::PairOnePlusDotBetween(m, left, right) => {
                let md = self.value(*m).data();
                let d = self.value(*m).shape()[1];
                let g0 = g[0];
                self.accumulate(adj, *m, |buf| {
                    for &i in left {
                        for &j in right {
                            pair_dot_adjoint(buf, md, d, i, j, g0);
                        }
                    }
                });
            }
        }
    }

    fn conv2d_backward(&self, x: Var, w: Var, g: &[T], adj: &mut [Option<Vec<T>>]) {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        let (c_in, h, wid) = (xs[0], xs[1], xs[2]);
        let (c_out, k) = (ws[0], ws[2]);
        let pad = (k - 1) as isize / 2;
        let xd = self.value(x).data();
        let wd = self.value(w).data();

        self.accumulate(adj, x, |buf| {
            for co in 0..c_out {
                for ci in 0..c_in {
                    let wbase = ((co * c_in) + ci) * k * k;
                    for oy in 0..h {
                        for ox in 0..wid {
                            let go = g[(co * h + oy) * wid + ox];
                            if go == T::zero() {
                                continue;
                            }
                            for dy in 0..k {
                                let iy = oy as isize + dy as isize - pad;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let brow = ci * h * wid + iy as usize * wid;
                                let wrow = wbase + dy * k;
                                for dx in 0..k {
                                    let ix = ox as isize + dx as isize - pad;
                                    if ix < 0 || ix >= wid as isize {
                                        continue;
                                    }
                                    let idx = brow + ix as usize;
                                    buf[idx] = buf[idx] + go * wd[wrow + dx];
                                }
                            }
                        }
                    }
                }
            }
        });

        self.accumulate(adj, w, |buf| {
            for co in 0..c_out {
                for ci in 0..c_in {
                    let wbase = ((co * c_in) + ci) * k * k;
                    for oy in 0..h {
                        for ox in 0..wid {
                            let go = g[(co * h + oy) * wid + ox];
                            if go == T::zero() {
                                continue;
                            }
                            for dy in 0..k {
                                let iy = oy as isize + dy as isize - pad;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let xrow = ci * h * wid + iy as usize * wid;
                                let wrow = wbase + dy * k;
                                for dx in 0..k {
                                    let ix = ox as isize + dx as isize - pad;
                                    if ix < 0 || ix >= wid as isize {
                                        continue;
                                    }
                                    buf[wrow + dx] = buf[wrow + dx] + go * xd[xrow + ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
}

#[inline]
fn add_into<T: Real>(out: &mut [T], src: &[T], k: T) {
    for (o, &s) in out.iter_mut().zip(src) {
        *o = *o + s * k;
    }
}

#[inline]
fn pair_sqdist_adjoint<T: Real>(buf: &mut [T], md: &[T], d: usize, i: usize, j: usize, k: T) {
    for e in 0..d {
        let diff = md[i * d + e] - md[j * d + e];
        buf[i * d + e] = buf[i * d + e] + k * diff;
        buf[j * d + e] = buf[j * d + e] - k * diff;
    }
}

#[inline]
fn pair_dot_adjoint<T: Real>(buf: &mut [T], md: &[T], d: usize, i: usize, j: usize, k: T) {
    for e in 0..d {
        buf[i * d + e] = buf[i * d + e] + k * md[j * d + e];
        buf[j * d + e] = buf[j * d + e] + k * md[i * d + e];
    }
}
