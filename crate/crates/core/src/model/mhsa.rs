use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Projection weights of multi-head self-attention, all `[D×D]`.
#[derive(Clone, Debug)]
pub struct MhsaWeights {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_out: Tensor,
}

/// Multi-head self-attention on tokens `x[T×D]`.
///
/// Each head attends with its own `D/h` column slice of `Q`, `K` and `V`;
/// head outputs are concatenated and projected by `W_out`.
pub fn mhsa_reference(x: &Tensor, w: &MhsaWeights, heads: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 2 {
        return Err(Error::invalid(format!("mhsa expects T×D tokens, got {s:?}")));
    }
    let d = s[1];
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::invalid(format!("{heads} heads do not divide width {d}")));
    }
    for m in [&w.w_q, &w.w_k, &w.w_v, &w.w_out] {
        if m.shape() != [d, d] {
            return Err(Error::shape("mhsa_reference", m.shape(), &[d, d]));
        }
    }
    let q = x.matmul(&w.w_q)?;
    let k = x.matmul(&w.w_k)?;
    let v = x.matmul(&w.w_v)?;
    let dh = d / heads;
    let outs = (0..heads)
        .map(|i| {
            let qi = q.slice_axis(1, i * dh, dh)?;
            let ki = k.slice_axis(1, i * dh, dh)?;
            let vi = v.slice_axis(1, i * dh, dh)?;
            let a = qi.matmul(&ki.transpose()?)?.scaled_softmax_last(dh as f64)?;
            a.matmul(&vi)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tensor> = outs.iter().collect();
    Tensor::concat(&refs, 1)?.matmul(&w.w_out)
}
