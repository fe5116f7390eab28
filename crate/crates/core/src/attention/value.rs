use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};

/// Per-group fused frequency-spatial maps, `[F×J×J]` each, in group order.
#[derive(Clone, Debug)]
pub struct FusedMap {
    pub groups: Vec<Var>,
}

impl FusedMap {
    /// All groups stacked along a new leading axis: `[n×F×J×J]`.
    pub fn concat(&self, tape: &Tape) -> Result<Var> {
        let parts = self
            .groups
            .iter()
            .map(|&g| tape.broadcast_axis(g, 0, 1))
            .collect::<Result<Vec<_>>>()?;
        tape.concat(&parts, 0)
    }
}

/// `MFS_i[f] = MF_i[f] + MS_i` for every frame. With `mf = None` the spatial
/// map alone is broadcast over `frames`.
pub fn fuse_and_concat(tape: &Tape, mf: Option<&[Var]>, ms: &[Var], frames: usize) -> Result<FusedMap> {
    if let Some(mf) = mf {
        if mf.len() != ms.len() {
            return Err(Error::invalid(format!(
                "{} frequency maps vs {} spatial maps",
                mf.len(),
                ms.len()
            )));
        }
    }
    let mut groups = Vec::with_capacity(ms.len());
    for (i, &s) in ms.iter().enumerate() {
        let s_shape = tape.shape(s);
        if s_shape.len() != 2 || s_shape[0] != s_shape[1] {
            return Err(Error::invalid(format!("spatial map must be J×J, got {s_shape:?}")));
        }
        let tiled = tape.broadcast_axis(s, 0, frames)?;
        let fused = match mf {
            Some(mf) => {
                let f_shape = tape.shape(mf[i]);
                if f_shape[1..] != s_shape[..] || f_shape[0] != frames {
                    return Err(Error::shape("fuse_and_concat", &f_shape, &s_shape));
                }
                tape.add(mf[i], tiled)?
            }
            None => tiled,
        };
        groups.push(fused);
    }
    Ok(FusedMap { groups })
}

/// 1×1 channel convolution: `V[j, o, f] = Σ_c x[j, c, f]·w[c][o] + b[o]`.
pub fn value_projection(tape: &Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let v = tape.contract_axis(x, 1, w)?;
    tape.add_along_axis(v, 1, b)
}

/// Applies each group's per-frame map to its channel slice of `v[J×C×F]`:
/// `out_i[:, :, f] = MFS_i[f] · V_i[:, :, f]`, groups re-concatenated on channels.
pub fn apply_fused(tape: &Tape, m: &FusedMap, v: Var) -> Result<Var> {
    let shape = tape.shape(v);
    let n = m.groups.len();
    if shape.len() != 3 || n == 0 || !shape[1].is_multiple_of(n) {
        return Err(Error::invalid(format!(
            "value tensor {shape:?} cannot be split into {n} groups"
        )));
    }
    let (j_len, width, frames) = (shape[0], shape[1] / n, shape[2]);
    let mut outs = Vec::with_capacity(n);
    for (i, &map) in m.groups.iter().enumerate() {
        let ms = tape.shape(map);
        if ms != [frames, j_len, j_len] {
            return Err(Error::shape("apply_value", &ms, &[frames, j_len, j_len]));
        }
        let vi = tape.slice_axis(v, 1, i * width, width)?;
        let per_frame = tape.permute(vi, &[2, 0, 1])?;
        let mixed = tape.bmm(map, per_frame)?;
        outs.push(tape.permute(mixed, &[1, 2, 0])?);
    }
    tape.concat(&outs, 1)
}

/// `x_t = M·V` with `V` the 1×1 channel convolution of the block input.
pub fn apply_value(tape: &Tape, m: &FusedMap, x: Var, w_v: Var, b_v: Var) -> Result<Var> {
    let v = value_projection(tape, x, w_v, b_v)?;
    apply_fused(tape, m, v)
}
