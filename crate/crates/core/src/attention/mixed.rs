use crate::error::{Error, Result};
use crate::numerics::{Pool, Tape, Var, pooled_projection};
use crate::spectral::{FrequencyOperatorConfig, SpectralBasis, frequency_operator_on};

use super::QkProjection;

/// Self and cross attention maps of every group plus their mixed sums.
///
/// With `n` groups there are `n` self maps, `n − 1` cross maps
/// (`mix[i]` pairs the queries of group `i+1` with the keys of group `i`)
/// and `n` mixed maps.
#[derive(Clone, Debug)]
pub struct MixedMaps {
    pub self_maps: Vec<Var>,
    pub mix_maps: Vec<Var>,
    pub mixed: Vec<Var>,
}

impl MixedMaps {
    /// How many raw maps were summed into `mixed[i]`.
    pub fn constituents(&self, i: usize) -> usize {
        let n = self.mixed.len();
        1 + usize::from(i + 1 < n) + usize::from(i > 0)
    }
}

fn check_groups(tape: &Tape, groups: &[Var], proj: usize) -> Result<Vec<usize>> {
    if groups.len() < 2 {
        return Err(Error::invalid(format!(
            "mixed attention needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if proj != groups.len() {
        return Err(Error::invalid(format!(
            "{} groups but {proj} projection sets",
            groups.len()
        )));
    }
    let shape = tape.shape(groups[0]);
    if shape.len() != 3 {
        return Err(Error::invalid(format!("group features must be J×C'×F, got {shape:?}")));
    }
    for g in &groups[1..] {
        let s = tape.shape(*g);
        if s != shape {
            return Err(Error::shape("group features", &shape, &s));
        }
    }
    Ok(shape)
}

/// Sums self maps with the adjacent cross maps; out-of-range terms are dropped.
fn mix(tape: &Tape, self_maps: Vec<Var>, mix_maps: Vec<Var>) -> Result<MixedMaps> {
    let n = self_maps.len();
    let mut mixed = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = self_maps[i];
        if i + 1 < n {
            acc = tape.add(acc, mix_maps[i])?;
        }
        if i > 0 {
            acc = tape.add(acc, mix_maps[i - 1])?;
        }
        mixed.push(acc);
    }
    Ok(MixedMaps {
        self_maps,
        mix_maps,
        mixed,
    })
}

fn attend(tape: &Tape, q: Var, k: Var, d: f64) -> Result<Var> {
    let rank = tape.shape(k).len();
    let kt = if rank == 2 {
        tape.transpose(k)?
    } else {
        tape.permute(k, &[0, 2, 1])?
    };
    let scores = if rank == 2 { tape.matmul(q, kt)? } else { tape.bmm(q, kt)? };
    tape.scaled_softmax(scores, d)
}

fn width(tape: &Tape, w: Var) -> f64 {
    tape.shape(w)[1] as f64
}

/// Spatial branch: per-joint tokens from frame-averaged features, `J×J` maps.
pub fn spatial_self_and_mixed(tape: &Tape, groups: &[Var], proj: &[QkProjection<Var>]) -> Result<MixedMaps> {
    check_groups(tape, groups, proj.len())?;
    let mut qs = Vec::with_capacity(groups.len());
    let mut ks = Vec::with_capacity(groups.len());
    for (&x, p) in groups.iter().zip(proj) {
        qs.push(pooled_projection(tape, x, p.w_q, p.b_q, Pool::Avg, 2)?);
        ks.push(pooled_projection(tape, x, p.w_k, p.b_k, Pool::Avg, 2)?);
    }
    let n = groups.len();
    let mut self_maps = Vec::with_capacity(n);
    let mut mix_maps = Vec::with_capacity(n - 1);
    for i in 0..n {
        self_maps.push(attend(tape, qs[i], ks[i], width(tape, proj[i].w_q))?);
        if i + 1 < n {
            mix_maps.push(attend(tape, qs[i + 1], ks[i], width(tape, proj[i].w_k))?);
        }
    }
    mix(tape, self_maps, mix_maps)
}

/// Output of the frequency branch for every group.
#[derive(Clone, Debug)]
pub struct FrequencyMaps {
    /// Per-bin mixed maps `[F×J×J]` before the frequency operator.
    pub bins: MixedMaps,
    /// Per-bin maps after the frequency operator (identical to `bins.mixed` when disabled).
    pub scaled: Vec<Var>,
    /// Per-frame maps `[F×J×J]` after the inverse transform.
    pub restored: Vec<Var>,
}

/// Frequency branch: DCT along frames, per-bin joint tokens and attention,
/// mixing, the frequency operator (`None` disables it), then IDCT along bins.
pub fn frequency_self_and_mixed(
    tape: &Tape,
    groups: &[Var],
    proj: &[QkProjection<Var>],
    basis: &SpectralBasis,
    fo: Option<&FrequencyOperatorConfig>,
) -> Result<FrequencyMaps> {
    let shape = check_groups(tape, groups, proj.len())?;
    if shape[2] != basis.frames() {
        return Err(Error::shape("frequency_self_and_mixed", &shape, &[basis.frames()]));
    }
    let n = groups.len();
    let mut qs = Vec::with_capacity(n);
    let mut ks = Vec::with_capacity(n);
    for (&x, p) in groups.iter().zip(proj) {
        let coeffs = basis.forward_on(tape, x, 2)?;
        let per_bin = tape.permute(coeffs, &[2, 0, 1])?;
        let q = tape.linear(per_bin, p.w_q, p.b_q)?;
        qs.push(tape.relu(q)?);
        let k = tape.linear(per_bin, p.w_k, p.b_k)?;
        ks.push(tape.relu(k)?);
    }
    let mut self_maps = Vec::with_capacity(n);
    let mut mix_maps = Vec::with_capacity(n - 1);
    for i in 0..n {
        self_maps.push(attend(tape, qs[i], ks[i], width(tape, proj[i].w_q))?);
        if i + 1 < n {
            mix_maps.push(attend(tape, qs[i + 1], ks[i], width(tape, proj[i].w_k))?);
        }
    }
    let bins = mix(tape, self_maps, mix_maps)?;
    let scaled = match fo {
        Some(cfg) => bins
            .mixed
            .iter()
            .map(|&m| frequency_operator_on(tape, m, 0, cfg))
            .collect::<Result<Vec<_>>>()?,
        None => bins.mixed.clone(),
    };
    let restored = scaled
        .iter()
        .map(|&m| basis.inverse_on(tape, m, 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyMaps {
        bins,
        scaled,
        restored,
    })
}
