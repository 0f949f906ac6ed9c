//! Define-by-run computation graph with a fixed op vocabulary.
//!
//! Nodes are appended in execution order, so the node list is already a
//! topological order and the backward pass is a single reverse sweep.

use std::cell::Cell;
use std::collections::HashMap;

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

// Below this many multiply-adds the rayon fan-out costs more than it saves.
const PAR_THRESHOLD: usize = 1 << 16;

thread_local! {
    static RELU_GRAD_FAULT: Cell<bool> = const { Cell::new(false) };
}

/// Corrupt the ReLU backward rule on the current thread.
///
/// Only exists so the self-check can prove it notices a broken gradient.
#[doc(hidden)]
pub fn inject_gradient_fault(on: bool) {
    RELU_GRAD_FAULT.with(|f| f.set(on));
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    /// `x · w + b`
    Affine(Var, Var, Var),
    Relu(Var),
    Add(Var, Var),
    Scale(Var, S),
    /// Mean across the columns of each row: `[n, k] -> [n, 1]`.
    RowMean(Var),
    /// Mean over groups of rows: `[n, d] -> [groups, d]`.
    GroupMean(Var, Vec<Vec<usize>>),
    SelectRows(Var, Vec<usize>),
    /// `[n, d] x [k, d] -> [n, k]` squared Euclidean distances.
    PairwiseSqDist(Var, Var),
    /// Stable log-sum-exp of each row: `[n, k] -> [n, 1]`.
    LogSumExp(Var),
    /// `-x[i, target_i] + logsumexp(x[i, :])`, i.e. the NLL of softmax(x).
    NllGather(Var, Vec<usize>),
    /// Mean of all entries to a scalar.
    Mean(Var),
}

struct Node<S> {
    op: Op<S>,
    value: Tensor<S>,
    requires_grad: bool,
    needs_grad: bool,
}

/// Gradients of a scalar with respect to every leaf created with
/// `requires_grad = true`.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    grads: HashMap<Var, Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, var: Var) -> Option<&Tensor<S>> {
        self.grads.get(&var)
    }
}

pub struct Graph<S> {
    nodes: Vec<Node<S>>,
    consumed: bool,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad: false,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn check_live(&self) -> Result<()> {
        if self.consumed {
            return Err(Error::Graph("graph already consumed by backward".into()));
        }
        Ok(())
    }

    fn matrix(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        self.value(v)
            .dims2()
            .ok_or_else(|| Error::shape(op, self.shape(v), &[0, 0]))
    }

    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor<S>) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.leaf(value, true)
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let (n, d) = self.matrix("affine", x)?;
        let (wd, h) = self.matrix("affine", w)?;
        if wd != d {
            return Err(Error::shape("affine", self.shape(x), self.shape(w)));
        }
        if self.shape(b) != [h] {
            return Err(Error::shape("affine", self.shape(w), self.shape(b)));
        }
        let xv = self.value(x).values();
        let wv = self.value(w).values();
        let bv = self.value(b).values();
        let mut out = vec![S::zero(); n * h];
        let row = |(i, out_row): (usize, &mut [S])| {
            out_row.copy_from_slice(bv);
            let x_row = &xv[i * d..(i + 1) * d];
            for (j, &xij) in x_row.iter().enumerate() {
                if xij == S::zero() {
                    continue;
                }
                for (o, &wjk) in out_row.iter_mut().zip(&wv[j * h..(j + 1) * h]) {
                    *o += xij * wjk;
                }
            }
        };
        if n * d * h >= PAR_THRESHOLD {
            out.par_chunks_mut(h).enumerate().for_each(row);
        } else {
            out.chunks_mut(h).enumerate().for_each(row);
        }
        let value = Tensor::new(vec![n, h], out)?;
        Ok(self.push(Op::Affine(x, w, b), value, &[x, w, b]))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let xv = self.value(x);
        let out = xv.values().iter().map(|&v| v.max(S::zero())).collect();
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(Op::Relu(x), value, &[x]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("add", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(&p, &q)| p + q)
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(Op::Add(a, b), value, &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Result<Var> {
        self.check_live()?;
        let out = self.value(a).values().iter().map(|&v| v * c).collect();
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(Op::Scale(a, c), value, &[a]))
    }

    pub fn row_mean(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let (n, k) = self.matrix("row_mean", x)?;
        let kf = S::of_usize(k);
        let xv = self.value(x).values();
        let out = (0..n)
            .map(|i| xv[i * k..(i + 1) * k].iter().copied().sum::<S>() / kf)
            .collect();
        let value = Tensor::new(vec![n, 1], out)?;
        Ok(self.push(Op::RowMean(x), value, &[x]))
    }

    /// Mean of each group of rows; every group must be nonempty.
    pub fn group_mean(&mut self, x: Var, groups: Vec<Vec<usize>>) -> Result<Var> {
        self.check_live()?;
        let (n, d) = self.matrix("group_mean", x)?;
        if groups.is_empty() {
            return Err(Error::InvalidArgument("group_mean: no groups".into()));
        }
        for (gi, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidArgument(format!("group_mean: group {gi} is empty")));
            }
            if let Some(&bad) = g.iter().find(|&&r| r >= n) {
                return Err(Error::shape("group_mean", &[n, d], &[bad]));
            }
        }
        let xv = self.value(x).values();
        let mut out = vec![S::zero(); groups.len() * d];
        for (g, out_row) in groups.iter().zip(out.chunks_mut(d)) {
            for &r in g {
                for (o, &v) in out_row.iter_mut().zip(&xv[r * d..(r + 1) * d]) {
                    *o += v;
                }
            }
            let m = S::of_usize(g.len());
            out_row.iter_mut().for_each(|o| *o /= m);
        }
        let value = Tensor::new(vec![groups.len(), d], out)?;
        Ok(self.push(Op::GroupMean(x, groups), value, &[x]))
    }

    pub fn select_rows(&mut self, x: Var, rows: Vec<usize>) -> Result<Var> {
        self.check_live()?;
        let (n, d) = self.matrix("select_rows", x)?;
        if rows.is_empty() {
            return Err(Error::InvalidArgument("select_rows: no rows".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::shape("select_rows", &[n, d], &[bad]));
        }
        let xv = self.value(x).values();
        let out = rows
            .iter()
            .flat_map(|&r| xv[r * d..(r + 1) * d].iter().copied())
            .collect();
        let value = Tensor::new(vec![rows.len(), d], out)?;
        Ok(self.push(Op::SelectRows(x, rows), value, &[x]))
    }

    pub fn pairwise_sqdist(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_live()?;
        let (n, d) = self.matrix("pairwise_sqdist", a)?;
        let (k, bd) = self.matrix("pairwise_sqdist", b)?;
        if bd != d {
            return Err(Error::shape("pairwise_sqdist", self.shape(a), self.shape(b)));
        }
        let av = self.value(a).values();
        let bv = self.value(b).values();
        let mut out = Vec::with_capacity(n * k);
        for i in 0..n {
            let ar = &av[i * d..(i + 1) * d];
            for c in 0..k {
                let br = &bv[c * d..(c + 1) * d];
                out.push(ar.iter().zip(br).map(|(&p, &q)| (p - q) * (p - q)).sum());
            }
        }
        let value = Tensor::new(vec![n, k], out)?;
        Ok(self.push(Op::PairwiseSqDist(a, b), value, &[a, b]))
    }

    pub fn logsumexp(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let (n, k) = self.matrix("logsumexp", x)?;
        let xv = self.value(x).values();
        let out = (0..n).map(|i| logsumexp_slice(&xv[i * k..(i + 1) * k])).collect();
        let value = Tensor::new(vec![n, 1], out)?;
        Ok(self.push(Op::LogSumExp(x), value, &[x]))
    }

    /// Per-row negative log-likelihood of `targets` under `softmax(logits)`.
    pub fn nll_gather(&mut self, logits: Var, targets: Vec<usize>) -> Result<Var> {
        self.check_live()?;
        let (n, k) = self.matrix("nll_gather", logits)?;
        if targets.len() != n {
            return Err(Error::shape("nll_gather", &[n, k], &[targets.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::shape("nll_gather", &[n, k], &[bad]));
        }
        let xv = self.value(logits).values();
        let out = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let row = &xv[i * k..(i + 1) * k];
                logsumexp_slice(row) - row[t]
            })
            .collect();
        let value = Tensor::new(vec![n, 1], out)?;
        Ok(self.push(Op::NllGather(logits, targets), value, &[logits]))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.check_live()?;
        let xv = self.value(x).values();
        let m = xv.iter().copied().sum::<S>() / S::of_usize(xv.len());
        Ok(self.push(Op::Mean(x), Tensor::scalar(m), &[x]))
    }

    /// Reverse sweep from a one-element `loss`. The graph cannot be used
    /// afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<S>> {
        self.check_live()?;
        if loss.0 >= self.nodes.len() {
            return Err(Error::Graph(format!("node {} not in graph", loss.0)));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.consumed = true;
        let fault = RELU_GRAD_FAULT.with(Cell::get);

        let mut grads: Vec<Option<Vec<S>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![S::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::Affine(x, w, b) => {
                    let (n, d) = self.value(*x).dims2().unwrap();
                    let h = self.value(*b).numel();
                    let xv = self.value(*x).values();
                    let wv = self.value(*w).values();
                    if self.nodes[b.0].needs_grad {
                        let mut gb = vec![S::zero(); h];
                        for gr in g.chunks(h) {
                            for (o, &v) in gb.iter_mut().zip(gr) {
                                *o += v;
                            }
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                    if self.nodes[w.0].needs_grad {
                        let mut gw = vec![S::zero(); d * h];
                        let row = |(j, gw_row): (usize, &mut [S])| {
                            for i in 0..n {
                                let xij = xv[i * d + j];
                                if xij == S::zero() {
                                    continue;
                                }
                                for (o, &gv) in gw_row.iter_mut().zip(&g[i * h..(i + 1) * h]) {
                                    *o += xij * gv;
                                }
                            }
                        };
                        if n * d * h >= PAR_THRESHOLD {
                            gw.par_chunks_mut(h).enumerate().for_each(row);
                        } else {
                            gw.chunks_mut(h).enumerate().for_each(row);
                        }
                        accumulate(&mut grads, *w, gw);
                    }
                    if self.nodes[x.0].needs_grad {
                        let mut gx = vec![S::zero(); n * d];
                        let row = |(i, gx_row): (usize, &mut [S])| {
                            let gr = &g[i * h..(i + 1) * h];
                            for (j, o) in gx_row.iter_mut().enumerate() {
                                *o = wv[j * h..(j + 1) * h]
                                    .iter()
                                    .zip(gr)
                                    .map(|(&wjk, &gk)| wjk * gk)
                                    .sum();
                            }
                        };
                        if n * d * h >= PAR_THRESHOLD {
                            gx.par_chunks_mut(d).enumerate().for_each(row);
                        } else {
                            gx.chunks_mut(d).enumerate().for_each(row);
                        }
                        accumulate(&mut grads, *x, gx);
                    }
                }
                Op::Relu(x) => {
                    let out = node.value.values();
                    let gx = g
                        .iter()
                        .zip(out)
                        .map(|(&gv, &o)| {
                            if fault {
                                gv
                            } else if o > S::zero() {
                                gv
                            } else {
                                S::zero()
                            }
                        })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.nodes[b.0].needs_grad {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Scale(a, c) => {
                    let gx = g.iter().map(|&v| v * *c).collect();
                    accumulate(&mut grads, *a, gx);
                }
                Op::RowMean(x) => {
                    let (_, k) = self.value(*x).dims2().unwrap();
                    let kf = S::of_usize(k);
                    let gx = g
                        .iter()
                        .flat_map(|&gi| std::iter::repeat_n(gi / kf, k))
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::GroupMean(x, groups) => {
                    let (n, d) = self.value(*x).dims2().unwrap();
                    let mut gx = vec![S::zero(); n * d];
                    for (grp, g_row) in groups.iter().zip(g.chunks(d)) {
                        let m = S::of_usize(grp.len());
                        for &r in grp {
                            for (o, &v) in gx[r * d..(r + 1) * d].iter_mut().zip(g_row) {
                                *o += v / m;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::SelectRows(x, rows) => {
                    let (n, d) = self.value(*x).dims2().unwrap();
                    let mut gx = vec![S::zero(); n * d];
                    for (&r, g_row) in rows.iter().zip(g.chunks(d)) {
                        for (o, &v) in gx[r * d..(r + 1) * d].iter_mut().zip(g_row) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::PairwiseSqDist(a, b) => {
                    let (n, d) = self.value(*a).dims2().unwrap();
                    let (k, _) = self.value(*b).dims2().unwrap();
                    let av = self.value(*a).values();
                    let bv = self.value(*b).values();
                    let two = S::of(2.0);
                    let mut ga = vec![S::zero(); n * d];
                    let mut gb = vec![S::zero(); k * d];
                    for i in 0..n {
                        for c in 0..k {
                            let gic = g[i * k + c] * two;
                            if gic == S::zero() {
                                continue;
                            }
                            for j in 0..d {
                                let diff = gic * (av[i * d + j] - bv[c * d + j]);
                                ga[i * d + j] += diff;
                                gb[c * d + j] -= diff;
                            }
                        }
                    }
                    if self.nodes[a.0].needs_grad {
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.nodes[b.0].needs_grad {
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::LogSumExp(x) => {
                    let (_, k) = self.value(*x).dims2().unwrap();
                    let xv = self.value(*x).values();
                    let lse = node.value.values();
                    let mut gx = Vec::with_capacity(xv.len());
                    for (i, &gi) in g.iter().enumerate() {
                        gx.extend(xv[i * k..(i + 1) * k].iter().map(|&v| gi * (v - lse[i]).exp()));
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::NllGather(x, targets) => {
                    let (_, k) = self.value(*x).dims2().unwrap();
                    let xv = self.value(*x).values();
                    let mut gx = Vec::with_capacity(xv.len());
                    for (i, (&gi, &t)) in g.iter().zip(targets).enumerate() {
                        let row = &xv[i * k..(i + 1) * k];
                        let lse = logsumexp_slice(row);
                        gx.extend(row.iter().enumerate().map(|(c, &v)| {
                            let p = (v - lse).exp();
                            gi * if c == t { p - S::one() } else { p }
                        }));
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Mean(x) => {
                    let n = self.value(*x).numel();
                    let gx = vec![g[0] / S::of_usize(n); n];
                    accumulate(&mut grads, *x, gx);
                }
            }
        }

        let mut out = HashMap::new();
        for (idx, g) in grads.into_iter().enumerate() {
            let node = &self.nodes[idx];
            if let (Some(g), true) = (g, node.requires_grad) {
                out.insert(Var(idx), Tensor::new(node.value.shape().to_vec(), g)?);
            }
        }
        // Leaves that did not influence the loss still get a zero gradient.
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad {
                out.entry(Var(idx))
                    .or_insert_with(|| Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        Ok(Gradients { grads: out })
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Vec<S>>], v: Var, g: Vec<S>) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(e, x)| *e += x),
        slot @ None => *slot = Some(g),
    }
}

/// Max-shifted log-sum-exp; `-inf` for an all `-inf` row.
pub fn logsumexp_slice<S: Scalar>(xs: &[S]) -> S {
    let m = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if m == S::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&v| (v - m).exp()).sum::<S>().ln()
}
