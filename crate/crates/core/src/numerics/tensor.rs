//! Dense row-major `f64` tensors and the eager kernels the tape builds on.

use std::fmt;

use crate::error::{Error, Result};

/// Dense real n-dimensional array, row-major and contiguous.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

/// Splits `shape` around `axis` into `(outer, len, inner)` extents.
pub(crate) fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::Axis {
            op,
            axis,
            rank: shape.len(),
        });
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} holds {n} values but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(vec![r, c], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest elementwise absolute difference; `inf` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `c[i][j] = Σ_l a[i][l]·b[l][j]` for rank-2 operands.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let (m, k, p) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * p];
        matmul_into(&self.data, &other.data, &mut out, m, k, p);
        Ok(Self {
            shape: vec![m, p],
            data: out,
        })
    }

    /// Batched matmul over a shared leading axis: `[B,m,k]·[B,k,p] → [B,m,p]`.
    pub fn bmm(&self, other: &Self) -> Result<Self> {
        if self.rank() != 3
            || other.rank() != 3
            || self.shape[0] != other.shape[0]
            || self.shape[2] != other.shape[1]
        {
            return Err(Error::shape("bmm", &self.shape, &other.shape));
        }
        let (b, m, k, p) = (self.shape[0], self.shape[1], self.shape[2], other.shape[2]);
        let mut out = vec![0.0; b * m * p];
        for s in 0..b {
            matmul_into(
                &self.data[s * m * k..(s + 1) * m * k],
                &other.data[s * k * p..(s + 1) * k * p],
                &mut out[s * m * p..(s + 1) * m * p],
                m,
                k,
                p,
            );
        }
        Ok(Self {
            shape: vec![b, m, p],
            data: out,
        })
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::invalid(format!(
                "transpose needs rank 2, got {:?}",
                self.shape
            )));
        }
        self.permute(&[1, 0])
    }

    /// Reorders axes so that output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::invalid(format!(
                "permutation {axes:?} invalid for rank {rank}"
            )));
        }
        let mut in_strides = vec![1usize; rank];
        for ax in (0..rank.saturating_sub(1)).rev() {
            in_strides[ax] = in_strides[ax + 1] * self.shape[ax + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; rank];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                off += strides[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                off -= strides[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self {
            shape: out_shape,
            data,
        })
    }

    /// Contracts `axis` against the rows of `w[in×out]`:
    /// `y[.., m, ..] = Σ_k x[.., k, ..]·w[k][m]`.
    pub fn contract_axis(&self, axis: usize, w: &Self) -> Result<Self> {
        check_axis("contract_axis", &self.shape, axis)?;
        if w.rank() != 2 || w.shape[0] != self.shape[axis] {
            return Err(Error::shape("contract_axis", &self.shape, &w.shape));
        }
        let (outer, k_len, inner) = split_at_axis(&self.shape, axis);
        let m_len = w.shape[1];
        let mut shape = self.shape.clone();
        shape[axis] = m_len;
        let mut out = vec![0.0; outer * m_len * inner];
        for o in 0..outer {
            let xo = &self.data[o * k_len * inner..(o + 1) * k_len * inner];
            let yo = &mut out[o * m_len * inner..(o + 1) * m_len * inner];
            if inner == 1 {
                matmul_into(xo, &w.data, yo, 1, k_len, m_len);
                continue;
            }
            for k in 0..k_len {
                let xrow = &xo[k * inner..(k + 1) * inner];
                for m in 0..m_len {
                    let wkm = w.data[k * m_len + m];
                    if wkm == 0.0 {
                        continue;
                    }
                    let yrow = &mut yo[m * inner..(m + 1) * inner];
                    for (y, &x) in yrow.iter_mut().zip(xrow) {
                        *y += wkm * x;
                    }
                }
            }
        }
        Ok(Self { shape, data: out })
    }

    /// Multiplies every slice along `axis` by the matching entry of `v`.
    pub fn scale_along_axis(&self, axis: usize, v: &[f64]) -> Result<Self> {
        check_axis("scale_along_axis", &self.shape, axis)?;
        if v.len() != self.shape[axis] {
            return Err(Error::shape("scale_along_axis", &self.shape, &[v.len()]));
        }
        let (outer, n, inner) = split_at_axis(&self.shape, axis);
        let mut data = self.data.clone();
        for o in 0..outer {
            for (k, &s) in v.iter().enumerate() {
                let base = (o * n + k) * inner;
                for x in &mut data[base..base + inner] {
                    *x *= s;
                }
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Adds `v[k]` to every element of slice `k` along `axis`.
    pub fn add_along_axis(&self, axis: usize, v: &[f64]) -> Result<Self> {
        check_axis("add_along_axis", &self.shape, axis)?;
        if v.len() != self.shape[axis] {
            return Err(Error::shape("add_along_axis", &self.shape, &[v.len()]));
        }
        let (outer, n, inner) = split_at_axis(&self.shape, axis);
        let mut data = self.data.clone();
        for o in 0..outer {
            for (k, &s) in v.iter().enumerate() {
                let base = (o * n + k) * inner;
                for x in &mut data[base..base + inner] {
                    *x += s;
                }
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Sums slices along `axis`, producing a vector of length `shape[axis]`.
    pub(crate) fn sum_to_axis(&self, axis: usize) -> Vec<f64> {
        let (outer, n, inner) = split_at_axis(&self.shape, axis);
        let mut acc = vec![0.0; n];
        for o in 0..outer {
            for (k, a) in acc.iter_mut().enumerate() {
                let base = (o * n + k) * inner;
                *a += self.data[base..base + inner].iter().sum::<f64>();
            }
        }
        acc
    }

    /// Mean over `axis`; the axis is removed.
    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        check_axis("mean_axis", &self.shape, axis)?;
        let (outer, n, inner) = split_at_axis(&self.shape, axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let base = (o * n + k) * inner;
                for i in 0..inner {
                    out[o * inner + i] += self.data[base + i];
                }
            }
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok(Self { shape, data: out })
    }

    /// Max over `axis` plus the flat source offset of each winner (first on ties).
    pub(crate) fn max_axis_with_arg(&self, axis: usize) -> Result<(Self, Vec<usize>)> {
        check_axis("max_axis", &self.shape, axis)?;
        let (outer, n, inner) = split_at_axis(&self.shape, axis);
        if n == 0 {
            return Err(Error::invalid("max over an empty axis"));
        }
        let mut out = vec![f64::NEG_INFINITY; outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let base = (o * n + k) * inner;
                for i in 0..inner {
                    let v = self.data[base + i];
                    if v > out[o * inner + i] {
                        out[o * inner + i] = v;
                        arg[o * inner + i] = base + i;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        Ok((Self { shape, data: out }, arg))
    }

    pub fn max_axis(&self, axis: usize) -> Result<Self> {
        Ok(self.max_axis_with_arg(axis)?.0)
    }

    /// Contiguous sub-range `[start, start+len)` along `axis`.
    pub fn slice_axis(&self, axis: usize, start: usize, len: usize) -> Result<Self> {
        check_axis("slice_axis", &self.shape, axis)?;
        if start + len > self.shape[axis] {
            return Err(Error::invalid(format!(
                "slice [{start}, {}) exceeds axis {axis} of {:?}",
                start + len,
                self.shape
            )));
        }
        let (outer, n, inner) = split_at_axis(&self.shape, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Self { shape, data })
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        check_axis("concat", &first.shape, axis)?;
        for p in parts {
            let same_rank = p.rank() == first.rank();
            let same_rest = same_rank
                && p
                    .shape
                    .iter()
                    .zip(&first.shape)
                    .enumerate()
                    .all(|(ax, (a, b))| ax == axis || a == b);
            if !same_rest {
                return Err(Error::shape("concat", &first.shape, &p.shape));
            }
        }
        let (outer, _, inner) = split_at_axis(&first.shape, axis);
        let total: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let n = p.shape[axis];
                data.extend_from_slice(&p.data[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = total;
        Ok(Self { shape, data })
    }

    /// Inserts a new axis of length `n` at position `pos` by repetition.
    pub fn broadcast_axis(&self, pos: usize, n: usize) -> Result<Self> {
        if pos > self.rank() {
            return Err(Error::Axis {
                op: "broadcast_axis",
                axis: pos,
                rank: self.rank(),
            });
        }
        let outer: usize = self.shape[..pos].iter().product();
        let inner: usize = self.shape[pos..].iter().product();
        let mut data = Vec::with_capacity(outer * n * inner);
        for o in 0..outer {
            let chunk = &self.data[o * inner..(o + 1) * inner];
            for _ in 0..n {
                data.extend_from_slice(chunk);
            }
        }
        let mut shape = self.shape.clone();
        shape.insert(pos, n);
        Ok(Self { shape, data })
    }

    /// Row softmax over the last axis of `x/√d`, with per-row max subtraction.
    pub fn scaled_softmax_last(&self, d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!("softmax scale d must be positive, got {d}")));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("softmax input".into()));
        }
        let cols = *self
            .shape
            .last()
            .ok_or_else(|| Error::invalid("softmax of a scalar"))?;
        let scale = 1.0 / d.sqrt();
        let mut data = self.data.clone();
        if cols > 0 {
            for row in data.chunks_mut(cols) {
                softmax_row(row, scale);
            }
        }
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }
}

pub(crate) fn softmax_row(row: &mut [f64], scale: f64) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v * scale));
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v * scale - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    row.iter_mut().for_each(|v| *v *= inv);
}

/// `out += a[m×k] · b[k×p]`; `out` is expected zeroed by the caller.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, p: usize) {
    for i in 0..m {
        let orow = &mut out[i * p..(i + 1) * p];
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == 0.0 {
                continue;
            }
            let brow = &b[l * p..(l + 1) * p];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += ail * bv;
            }
        }
    }
}
