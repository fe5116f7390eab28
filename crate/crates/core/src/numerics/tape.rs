//! Reverse-mode differentiation over the primitive set the model needs.
//!
//! Every op evaluates eagerly, appends a node holding its value, and keeps a
//! closure that maps the upstream gradient to parent gradients. `backward`
//! walks the nodes once, newest first.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use crate::error::{Error, Result};

use super::tensor::split_at_axis;
use super::{ParamId, ParamStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

struct BackCtx<'a> {
    grad: &'a Tensor,
    inputs: Vec<&'a Tensor>,
    output: &'a Tensor,
    needs: Vec<bool>,
}

type BackwardFn = Box<dyn Fn(&BackCtx<'_>) -> Result<Vec<Option<Tensor>>>>;

struct Node {
    op: &'static str,
    value: Tensor,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// Ordered record of primitive operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    leaves: HashMap<usize, Tensor>,
    params: Vec<(ParamId, Tensor)>,
    visited: usize,
}

impl Gradients {
    /// Gradient with respect to a leaf recorded via [`Tape::leaf`] or [`Tape::param`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(&v.0)
    }

    /// Summed gradient for a parameter (several bindings of one id are added).
    pub fn param(&self, id: ParamId) -> Option<Tensor> {
        let mut acc: Option<Tensor> = None;
        for (pid, g) in &self.params {
            if *pid == id {
                match acc.as_mut() {
                    Some(a) => a.add_assign(g),
                    None => acc = Some(g.clone()),
                }
            }
        }
        acc
    }

    /// Number of recorded nodes the backward sweep processed.
    pub fn visited(&self) -> usize {
        self.visited
    }

    /// Adds `scale · ∂loss/∂p` into each bound parameter's gradient.
    pub fn accumulate_into(&self, store: &mut ParamStore, scale: f64) {
        for (id, g) in &self.params {
            let p = store.get_mut(*id);
            for (a, b) in p.gradient.data_mut().iter_mut().zip(g.data()) {
                *a += scale * b;
            }
        }
    }

    /// Overwrites parameter gradients with this pass's result.
    pub fn write_into(&self, store: &mut ParamStore) {
        for (id, _) in &self.params {
            store.get_mut(*id).gradient.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
        self.accumulate_into(store, 1.0);
    }
}

/// Runs backward from `loss` and writes the result into `store`'s gradients.
pub fn record_and_backward(tape: &Tape, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
    let grads = tape.backward(loss)?;
    store.zero_grad();
    grads.accumulate_into(store, 1.0);
    Ok(grads)
}

fn need(ctx: &BackCtx<'_>, i: usize) -> bool {
    ctx.needs[i]
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn item(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].value.item()
    }

    fn push_leaf(&self, value: Tensor, requires_grad: bool, param: Option<ParamId>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op: "leaf",
            value,
            parents: vec![],
            backward: None,
            requires_grad,
            param,
        });
        Var(nodes.len() - 1)
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push_leaf(value, false, None)
    }

    /// A differentiable input whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push_leaf(value, true, None)
    }

    /// Binds a parameter's current value.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        self.push_leaf(store.value(id).clone(), true, Some(id))
    }

    fn push(&self, op: &'static str, value: Tensor, parents: &[Var], backward: BackwardFn) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(op.to_string()));
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = parents.iter().any(|p| nodes[p.0].requires_grad);
        nodes.push(Node {
            op,
            value,
            parents: parents.iter().map(|p| p.0).collect(),
            backward: requires_grad.then_some(backward),
            requires_grad,
            param: None,
        });
        Ok(Var(nodes.len() - 1))
    }

    fn with2<R>(&self, a: Var, b: Var, f: impl FnOnce(&Tensor, &Tensor) -> R) -> R {
        let nodes = self.nodes.borrow();
        f(&nodes[a.0].value, &nodes[b.0].value)
    }

    fn with1<R>(&self, a: Var, f: impl FnOnce(&Tensor) -> R) -> R {
        let nodes = self.nodes.borrow();
        f(&nodes[a.0].value)
    }

    /// Reverse sweep from a scalar `loss`. A tape can be swept once.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.consumed.replace(true) {
            return Err(Error::Tape("backward already ran on this tape; record a new one".into()));
        }
        let nodes = self.nodes.borrow();
        if nodes.is_empty() {
            return Err(Error::Tape("backward on an empty tape".into()));
        }
        if nodes[loss.0].value.len() != 1 {
            return Err(Error::Tape(format!(
                "loss must be scalar, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(nodes[loss.0].value.shape(), 1.0));
        let mut out = Gradients::default();
        for i in (0..=loss.0).rev() {
            out.visited += 1;
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(back) = &node.backward else {
                if let Some(pid) = node.param {
                    out.params.push((pid, g.clone()));
                }
                out.leaves.insert(i, g);
                continue;
            };
            let ctx = BackCtx {
                grad: &g,
                inputs: node.parents.iter().map(|&p| &nodes[p].value).collect(),
                output: &node.value,
                needs: node.parents.iter().map(|&p| nodes[p].requires_grad).collect(),
            };
            let parent_grads = back(&ctx)?;
            for (&p, pg) in node.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !nodes[p].requires_grad {
                    continue;
                }
                if pg.shape() != nodes[p].value.shape() {
                    return Err(Error::Tape(format!(
                        "{}: gradient shape {:?} does not match input {:?}",
                        node.op,
                        pg.shape(),
                        nodes[p].value.shape()
                    )));
                }
                match grads[p].as_mut() {
                    Some(acc) => acc.add_assign(&pg),
                    None => grads[p] = Some(pg),
                }
            }
        }
        Ok(out)
    }

    // ---- elementwise -------------------------------------------------

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.with2(a, b, |x, y| x.add(y))?;
        self.push("add", v, &[a, b], Box::new(|c| Ok(vec![Some(c.grad.clone()), Some(c.grad.clone())])))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.with2(a, b, |x, y| x.sub(y))?;
        self.push("sub", v, &[a, b], Box::new(|c| Ok(vec![Some(c.grad.clone()), Some(c.grad.scale(-1.0))])))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.with2(a, b, |x, y| x.mul(y))?;
        self.push(
            "mul",
            v,
            &[a, b],
            Box::new(|c| {
                let ga = need(c, 0).then(|| c.grad.mul(c.inputs[1])).transpose()?;
                let gb = need(c, 1).then(|| c.grad.mul(c.inputs[0])).transpose()?;
                Ok(vec![ga, gb])
            }),
        )
    }

    pub fn scale(&self, a: Var, s: f64) -> Result<Var> {
        let v = self.with1(a, |x| x.scale(s));
        self.push("scale", v, &[a], Box::new(move |c| Ok(vec![Some(c.grad.scale(s))])))
    }

    pub fn relu(&self, a: Var) -> Result<Var> {
        let v = self.with1(a, |x| x.map(|t| t.max(0.0)));
        self.push(
            "relu",
            v,
            &[a],
            Box::new(|c| {
                Ok(vec![Some(c.grad.zip_with(c.inputs[0], "relu", |g, x| if x > 0.0 { g } else { 0.0 })?)])
            }),
        )
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var> {
        let v = self.with1(a, |x| x.map(sigmoid));
        self.push(
            "sigmoid",
            v,
            &[a],
            Box::new(|c| Ok(vec![Some(c.grad.zip_with(c.output, "sigmoid", |g, s| g * s * (1.0 - s))?)])),
        )
    }

    // ---- linear algebra ----------------------------------------------

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.with2(a, b, |x, y| x.matmul(y))?;
        self.push(
            "matmul",
            v,
            &[a, b],
            Box::new(|c| {
                let ga = need(c, 0).then(|| c.grad.matmul(&c.inputs[1].transpose()?)).transpose()?;
                let gb = need(c, 1).then(|| c.inputs[0].transpose()?.matmul(c.grad)).transpose()?;
                Ok(vec![ga, gb])
            }),
        )
    }

    /// `[B,m,k]·[B,k,p] → [B,m,p]`.
    pub fn bmm(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.with2(a, b, |x, y| x.bmm(y))?;
        self.push(
            "bmm",
            v,
            &[a, b],
            Box::new(|c| {
                let ga = need(c, 0)
                    .then(|| c.grad.bmm(&c.inputs[1].permute(&[0, 2, 1])?))
                    .transpose()?;
                let gb = need(c, 1)
                    .then(|| c.inputs[0].permute(&[0, 2, 1])?.bmm(c.grad))
                    .transpose()?;
                Ok(vec![ga, gb])
            }),
        )
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        self.permute(a, &[1, 0])
    }

    pub fn permute(&self, a: Var, axes: &[usize]) -> Result<Var> {
        let v = self.with1(a, |x| x.permute(axes))?;
        let mut inverse = vec![0; axes.len()];
        for (i, &ax) in axes.iter().enumerate() {
            inverse[ax] = i;
        }
        self.push("permute", v, &[a], Box::new(move |c| Ok(vec![Some(c.grad.permute(&inverse)?)])))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.with1(a, |x| x.reshape(shape))?;
        self.push(
            "reshape",
            v,
            &[a],
            Box::new(|c| Ok(vec![Some(c.grad.reshape(c.inputs[0].shape())?)])),
        )
    }

    /// `y[.., m, ..] = Σ_k x[.., k, ..]·w[k][m]`; differentiable in both operands.
    pub fn contract_axis(&self, x: Var, axis: usize, w: Var) -> Result<Var> {
        let v = self.with2(x, w, |x, w| x.contract_axis(axis, w))?;
        self.push(
            "contract_axis",
            v,
            &[x, w],
            Box::new(move |c| {
                let (xv, wv) = (c.inputs[0], c.inputs[1]);
                let gx = need(c, 0).then(|| c.grad.contract_axis(axis, &wv.transpose()?)).transpose()?;
                let gw = if need(c, 1) {
                    let (outer, k_len, inner) = split_at_axis(xv.shape(), axis);
                    let m_len = wv.shape()[1];
                    let mut gw = vec![0.0; k_len * m_len];
                    for o in 0..outer {
                        let xo = &xv.data()[o * k_len * inner..(o + 1) * k_len * inner];
                        let go = &c.grad.data()[o * m_len * inner..(o + 1) * m_len * inner];
                        for k in 0..k_len {
                            let xrow = &xo[k * inner..(k + 1) * inner];
                            for m in 0..m_len {
                                let grow = &go[m * inner..(m + 1) * inner];
                                gw[k * m_len + m] += xrow.iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                            }
                        }
                    }
                    Some(Tensor::new(vec![k_len, m_len], gw)?)
                } else {
                    None
                };
                Ok(vec![gx, gw])
            }),
        )
    }

    /// `y = x·w + b` over the last axis, with `w[in×out]` and `b[out]`.
    pub fn linear(&self, x: Var, w: Var, b: Var) -> Result<Var> {
        let last = self.shape(x).len().checked_sub(1).ok_or_else(|| Error::invalid("linear on a scalar"))?;
        let y = self.contract_axis(x, last, w)?;
        self.add_along_axis(y, last, b)
    }

    /// Adds vector `b` to every slice along `axis`.
    pub fn add_along_axis(&self, x: Var, axis: usize, b: Var) -> Result<Var> {
        let v = self.with2(x, b, |x, b| {
            if b.rank() != 1 {
                return Err(Error::shape("add_along_axis", x.shape(), b.shape()));
            }
            x.add_along_axis(axis, b.data())
        })?;
        self.push(
            "add_along_axis",
            v,
            &[x, b],
            Box::new(move |c| {
                let gb = need(c, 1)
                    .then(|| Tensor::new(vec![c.inputs[1].len()], c.grad.sum_to_axis(axis)))
                    .transpose()?;
                Ok(vec![Some(c.grad.clone()), gb])
            }),
        )
    }

    /// Multiplies each slice along `axis` by the matching entry of vector `s`.
    pub fn scale_along_axis(&self, x: Var, axis: usize, s: Var) -> Result<Var> {
        let v = self.with2(x, s, |x, s| {
            if s.rank() != 1 {
                return Err(Error::shape("scale_along_axis", x.shape(), s.shape()));
            }
            x.scale_along_axis(axis, s.data())
        })?;
        self.push(
            "scale_along_axis",
            v,
            &[x, s],
            Box::new(move |c| {
                let gx = need(c, 0).then(|| c.grad.scale_along_axis(axis, c.inputs[1].data())).transpose()?;
                let gs = if need(c, 1) {
                    let prod = c.grad.mul(c.inputs[0])?;
                    Some(Tensor::new(vec![c.inputs[1].len()], prod.sum_to_axis(axis))?)
                } else {
                    None
                };
                Ok(vec![gx, gs])
            }),
        )
    }

    // ---- softmax, pooling, shape plumbing ----------------------------

    /// Row softmax of `x/√d` over the last axis.
    pub fn scaled_softmax(&self, x: Var, d: f64) -> Result<Var> {
        let v = self.with1(x, |t| t.scaled_softmax_last(d))?;
        let scale = 1.0 / d.sqrt();
        self.push(
            "softmax",
            v,
            &[x],
            Box::new(move |c| {
                let y = c.output;
                let cols = *y.shape().last().unwrap_or(&1);
                let mut gx = vec![0.0; y.len()];
                for ((gxr, yr), gr) in gx
                    .chunks_mut(cols)
                    .zip(y.data().chunks(cols))
                    .zip(c.grad.data().chunks(cols))
                {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in gxr.iter_mut().zip(yr).zip(gr) {
                        *o = scale * yv * (gv - dot);
                    }
                }
                Ok(vec![Some(Tensor::new(y.shape().to_vec(), gx)?)])
            }),
        )
    }

    /// Mean over one axis, which is removed.
    pub fn mean_axis(&self, x: Var, axis: usize) -> Result<Var> {
        let v = self.with1(x, |t| t.mean_axis(axis))?;
        self.push(
            "mean_axis",
            v,
            &[x],
            Box::new(move |c| {
                let n = c.inputs[0].shape()[axis];
                Ok(vec![Some(c.grad.broadcast_axis(axis, n)?.scale(1.0 / n as f64))])
            }),
        )
    }

    /// Max over one axis, which is removed; the gradient routes to the first maximiser.
    pub fn max_axis(&self, x: Var, axis: usize) -> Result<Var> {
        let (v, arg) = self.with1(x, |t| t.max_axis_with_arg(axis))?;
        self.push(
            "max_axis",
            v,
            &[x],
            Box::new(move |c| {
                let mut g = Tensor::zeros(c.inputs[0].shape());
                for (&src, &gv) in arg.iter().zip(c.grad.data()) {
                    g.data_mut()[src] += gv;
                }
                Ok(vec![Some(g)])
            }),
        )
    }

    pub fn slice_axis(&self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let v = self.with1(x, |t| t.slice_axis(axis, start, len))?;
        self.push(
            "slice_axis",
            v,
            &[x],
            Box::new(move |c| {
                let shape = c.inputs[0].shape();
                let (outer, n, inner) = split_at_axis(shape, axis);
                let mut g = Tensor::zeros(shape);
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    let src = o * len * inner;
                    g.data_mut()[dst..dst + len * inner]
                        .copy_from_slice(&c.grad.data()[src..src + len * inner]);
                }
                Ok(vec![Some(g)])
            }),
        )
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var> {
        let v = {
            let nodes = self.nodes.borrow();
            let refs: Vec<&Tensor> = parts.iter().map(|p| &nodes[p.0].value).collect();
            Tensor::concat(&refs, axis)?
        };
        self.push(
            "concat",
            v,
            parts,
            Box::new(move |c| {
                let mut start = 0;
                let mut out = Vec::with_capacity(c.inputs.len());
                for inp in &c.inputs {
                    let len = inp.shape()[axis];
                    out.push(Some(c.grad.slice_axis(axis, start, len)?));
                    start += len;
                }
                Ok(out)
            }),
        )
    }

    /// Inserts a new axis of length `n` at `pos` by repetition.
    pub fn broadcast_axis(&self, x: Var, pos: usize, n: usize) -> Result<Var> {
        let v = self.with1(x, |t| t.broadcast_axis(pos, n))?;
        self.push(
            "broadcast_axis",
            v,
            &[x],
            Box::new(move |c| {
                let g = c.grad.mean_axis(pos)?.scale(n as f64);
                Ok(vec![Some(g)])
            }),
        )
    }

    pub fn sum(&self, x: Var) -> Result<Var> {
        let v = self.with1(x, |t| Tensor::scalar(t.sum()));
        self.push(
            "sum",
            v,
            &[x],
            Box::new(|c| Ok(vec![Some(Tensor::full(c.inputs[0].shape(), c.grad.item()))])),
        )
    }

    /// `logsumexp(logits) − logits[label]` for a 1-D logit vector.
    pub fn cross_entropy(&self, logits: Var, label: usize) -> Result<Var> {
        let (loss, probs) = self.with1(logits, |t| {
            if t.rank() != 1 || label >= t.len() {
                return Err(Error::invalid(format!(
                    "cross_entropy needs a 1-D logit vector containing label {label}, got {:?}",
                    t.shape()
                )));
            }
            let p = t.scaled_softmax_last(1.0)?;
            let max = t.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + t.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            Ok((lse - t.data()[label], p))
        })?;
        self.push(
            "cross_entropy",
            Tensor::scalar(loss),
            &[logits],
            Box::new(move |c| {
                let mut g = probs.clone();
                g.data_mut()[label] -= 1.0;
                Ok(vec![Some(g.scale(c.grad.item()))])
            }),
        )
    }

    /// Zero-padded temporal convolution over the frame axis of `x[J,Ci,F]` with
    /// `w[Co,Ci,K]` (odd `K`) and the given dilation; the frame count is preserved.
    pub fn temporal_conv(&self, x: Var, w: Var, dilation: usize) -> Result<Var> {
        let v = self.with2(x, w, |x, w| temporal_conv(x, w, dilation))?;
        self.push(
            "temporal_conv",
            v,
            &[x, w],
            Box::new(move |c| {
                let (xv, wv, g) = (c.inputs[0], c.inputs[1], c.grad);
                let (j_len, ci, f_len) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let (co, k_len) = (wv.shape()[0], wv.shape()[2]);
                let half = (k_len / 2) as isize;
                let mut gx = vec![0.0; xv.len()];
                let mut gw = vec![0.0; wv.len()];
                for j in 0..j_len {
                    for o in 0..co {
                        let grow = &g.data()[(j * co + o) * f_len..(j * co + o + 1) * f_len];
                        for cin in 0..ci {
                            let xbase = (j * ci + cin) * f_len;
                            for k in 0..k_len {
                                let widx = (o * ci + cin) * k_len + k;
                                let shift = (k as isize - half) * dilation as isize;
                                let wk = wv.data()[widx];
                                let mut acc = 0.0;
                                for (f, &gv) in grow.iter().enumerate() {
                                    let src = f as isize + shift;
                                    if src < 0 || src >= f_len as isize {
                                        continue;
                                    }
                                    let src = xbase + src as usize;
                                    acc += gv * xv.data()[src];
                                    gx[src] += gv * wk;
                                }
                                gw[widx] += acc;
                            }
                        }
                    }
                }
                Ok(vec![
                    Some(Tensor::new(xv.shape().to_vec(), gx)?),
                    Some(Tensor::new(wv.shape().to_vec(), gw)?),
                ])
            }),
        )
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

/// Eager form of [`Tape::temporal_conv`].
pub fn temporal_conv(x: &Tensor, w: &Tensor, dilation: usize) -> Result<Tensor> {
    if x.rank() != 3 || w.rank() != 3 || w.shape()[1] != x.shape()[1] || w.shape()[2].is_multiple_of(2) {
        return Err(Error::shape("temporal_conv", x.shape(), w.shape()));
    }
    let (j_len, ci, f_len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, k_len) = (w.shape()[0], w.shape()[2]);
    let half = (k_len / 2) as isize;
    let mut out = vec![0.0; j_len * co * f_len];
    for j in 0..j_len {
        for o in 0..co {
            let orow = &mut out[(j * co + o) * f_len..(j * co + o + 1) * f_len];
            for cin in 0..ci {
                let xrow = &x.data()[(j * ci + cin) * f_len..(j * ci + cin + 1) * f_len];
                for k in 0..k_len {
                    let wk = w.data()[(o * ci + cin) * k_len + k];
                    let shift = (k as isize - half) * dilation as isize;
                    for (f, ov) in orow.iter_mut().enumerate() {
                        let src = f as isize + shift;
                        if src >= 0 && src < f_len as isize {
                            *ov += wk * xrow[src as usize];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![j_len, co, f_len], out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::numerics::Rng;

    /// Max relative error between tape gradients and central differences for
    /// every input of `f`.
    pub(crate) fn fd_max_rel_err(inputs: &[Tensor], f: impl Fn(&Tape, &[Var]) -> Result<Var>) -> f64 {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = f(&tape, &vars).unwrap();
        let grads = tape.backward(loss).unwrap();
        let eval = |xs: &[Tensor]| {
            let t = Tape::new();
            let vs: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
            let l = f(&t, &vs).unwrap();
            t.item(l)
        };
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for (i, x) in inputs.iter().enumerate() {
            let analytic = grads.wrt(vars[i]).cloned().unwrap_or_else(|| Tensor::zeros(x.shape()));
            for k in 0..x.len() {
                let mut plus = inputs.to_vec();
                plus[i].data_mut()[k] += eps;
                let mut minus = inputs.to_vec();
                minus[i].data_mut()[k] -= eps;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let a = analytic.data()[k];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    fn weighted_sum(tape: &Tape, y: Var, seed: u64) -> Result<Var> {
        let mut rng = Rng::new(seed);
        let w = tape.constant(rng.uniform_tensor(&tape.shape(y), -1.0, 1.0));
        let p = tape.mul(y, w)?;
        tape.sum(p)
    }

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(3.0));
        let loss = tape.mul(w, w).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w).unwrap().item(), 6.0);
    }

    #[test]
    fn softmax_sum_has_zero_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![1, 4], vec![0.3, -1.0, 2.0, 0.5]).unwrap());
        let s = tape.scaled_softmax(x, 1.0).unwrap();
        let loss = tape.sum(s).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.wrt(x).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn backward_errors() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2]));
        assert!(tape.backward(x).is_err(), "non-scalar loss");
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.0));
        let y = tape.scale(x, 2.0).unwrap();
        assert!(tape.backward(y).is_ok());
        assert!(tape.backward(y).is_err(), "second sweep");
    }

    #[test]
    fn backward_visits_each_node_once() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let y = tape.mul(x, x).unwrap();
        let z = tape.add(y, x).unwrap();
        let g = tape.backward(z).unwrap();
        assert_eq!(g.visited(), tape.len());
        assert_eq!(g.wrt(x).unwrap().item(), 5.0);
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        let mut rng = Rng::new(21);
        let mut u = |shape: &[usize]| rng.uniform_tensor(shape, -1.0, 1.0);
        let cases: Vec<(&str, Vec<Tensor>, Box<dyn Fn(&Tape, &[Var]) -> Result<Var>>)> = vec![
            ("matmul", vec![u(&[3, 4]), u(&[4, 2])], Box::new(|t, v| {
                let y = t.matmul(v[0], v[1])?;
                weighted_sum(t, y, 1)
            })),
            ("bmm", vec![u(&[2, 3, 4]), u(&[2, 4, 2])], Box::new(|t, v| {
                let y = t.bmm(v[0], v[1])?;
                weighted_sum(t, y, 2)
            })),
            ("softmax", vec![u(&[3, 5])], Box::new(|t, v| {
                let y = t.scaled_softmax(v[0], 2.0)?;
                weighted_sum(t, y, 3)
            })),
            ("contract_axis", vec![u(&[2, 3, 4]), u(&[3, 5])], Box::new(|t, v| {
                let y = t.contract_axis(v[0], 1, v[1])?;
                weighted_sum(t, y, 4)
            })),
            ("along_axis", vec![u(&[2, 3, 4]), u(&[3]), u(&[3])], Box::new(|t, v| {
                let y = t.scale_along_axis(v[0], 1, v[1])?;
                let y = t.add_along_axis(y, 1, v[2])?;
                weighted_sum(t, y, 5)
            })),
            ("pooling", vec![u(&[3, 4, 5])], Box::new(|t, v| {
                let a = t.mean_axis(v[0], 2)?;
                let b = t.max_axis(v[0], 2)?;
                let y = t.add(a, b)?;
                weighted_sum(t, y, 6)
            })),
            ("permute_slice_concat", vec![u(&[2, 4, 3])], Box::new(|t, v| {
                let p = t.permute(v[0], &[2, 0, 1])?;
                let a = t.slice_axis(p, 2, 0, 1)?;
                let b = t.slice_axis(p, 2, 1, 3)?;
                let y = t.concat(&[b, a], 2)?;
                let y = t.broadcast_axis(y, 1, 2)?;
                weighted_sum(t, y, 7)
            })),
            ("nonlinear", vec![u(&[4, 3])], Box::new(|t, v| {
                let r = t.relu(v[0])?;
                let s = t.sigmoid(v[0])?;
                let y = t.mul(r, s)?;
                weighted_sum(t, y, 8)
            })),
            ("temporal_conv", vec![u(&[2, 3, 7]), u(&[4, 3, 3])], Box::new(|t, v| {
                let a = t.temporal_conv(v[0], v[1], 1)?;
                let b = t.temporal_conv(v[0], v[1], 2)?;
                let y = t.add(a, b)?;
                weighted_sum(t, y, 9)
            })),
            ("cross_entropy", vec![u(&[5])], Box::new(|t, v| t.cross_entropy(v[0], 2))),
        ];
        for (name, inputs, f) in cases {
            let err = fd_max_rel_err(&inputs, f);
            assert!(err < 1e-6, "{name}: relative error {err}");
        }
    }

    #[test]
    fn temporal_conv_matches_loop_oracle() {
        let mut rng = Rng::new(5);
        let x = rng.uniform_tensor(&[2, 3, 8], -1.0, 1.0);
        let w = rng.uniform_tensor(&[2, 3, 3], -1.0, 1.0);
        for dil in [1usize, 2] {
            let y = temporal_conv(&x, &w, dil).unwrap();
            let oracle = Tensor::from_fn(&[2, 2, 8], |ix| {
                let mut s = 0.0;
                for c in 0..3 {
                    for k in 0..3 {
                        let f = ix[2] as isize + (k as isize - 1) * dil as isize;
                        if (0..8).contains(&f) {
                            s += w.get(&[ix[1], c, k]) * x.get(&[ix[0], c, f as usize]);
                        }
                    }
                }
                s
            });
            assert!(y.max_abs_diff(&oracle) < 1e-12);
        }
    }
}
