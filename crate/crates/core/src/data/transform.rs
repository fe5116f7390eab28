use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Default centre joint (0-based): the NTU mid-spine.
pub const DEFAULT_CENTER_JOINT: usize = 1;

/// Linearly resamples every trajectory of `x[J×C×F_raw]` to `frames` samples,
/// then subtracts the first frame's `center` joint from every joint and frame.
pub fn resample_center(x: &Tensor, frames: usize, center: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 3 || s[2] == 0 {
        return Err(Error::invalid(format!("expected a non-empty J×C×F sequence, got {s:?}")));
    }
    if frames == 0 {
        return Err(Error::invalid("target frame count must be positive"));
    }
    let (j, c, raw) = (s[0], s[1], s[2]);
    if center >= j {
        return Err(Error::invalid(format!("centre joint {center} out of range for {j} joints")));
    }
    let step = if frames > 1 { (raw - 1) as f64 / (frames - 1) as f64 } else { 0.0 };
    let resampled = Tensor::from_fn(&[j, c, frames], |ix| {
        let t = ix[2] as f64 * step;
        let lo = (t.floor() as usize).min(raw - 1);
        let hi = (lo + 1).min(raw - 1);
        let w = t - lo as f64;
        let a = x.get(&[ix[0], ix[1], lo]);
        if w == 0.0 {
            a
        } else {
            a + w * (x.get(&[ix[0], ix[1], hi]) - a)
        }
    });
    let origin: Vec<f64> = (0..c).map(|cc| resampled.get(&[center, cc, 0])).collect();
    Ok(Tensor::from_fn(&[j, c, frames], |ix| resampled.get(ix) - origin[ix[1]]))
}

/// Input stream derived from joint coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    Joint,
    Bone,
    JointMotion,
    BoneMotion,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Joint, Modality::Bone, Modality::JointMotion, Modality::BoneMotion];
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Joint => "joint",
            Modality::Bone => "bone",
            Modality::JointMotion => "joint_motion",
            Modality::BoneMotion => "bone_motion",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown modality {s:?}")))
    }
}

fn bones(x: &Tensor, parents: &[usize]) -> Result<Tensor> {
    let j = x.shape()[0];
    if parents.len() != j {
        return Err(Error::invalid(format!("{} parents for {j} joints", parents.len())));
    }
    if let Some(&bad) = parents.iter().find(|&&p| p >= j) {
        return Err(Error::invalid(format!("parent index {bad} out of range for {j} joints")));
    }
    Ok(Tensor::from_fn(x.shape(), |ix| x.get(ix) - x.get(&[parents[ix[0]], ix[1], ix[2]])))
}

fn motion(x: &Tensor) -> Tensor {
    let f = x.shape()[2];
    Tensor::from_fn(x.shape(), |ix| {
        if ix[2] + 1 < f {
            x.get(&[ix[0], ix[1], ix[2] + 1]) - x.get(ix)
        } else {
            0.0
        }
    })
}

/// Bone vectors `x[j] − x[parent(j)]` and/or per-frame differences (last frame zero).
pub fn derive_modality(x: &Tensor, m: Modality, parents: &[usize]) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(Error::invalid(format!("expected J×C×F, got {:?}", x.shape())));
    }
    match m {
        Modality::Joint => {
            bones(x, parents)?;
            Ok(x.clone())
        }
        Modality::Bone => bones(x, parents),
        Modality::JointMotion => {
            bones(x, parents)?;
            Ok(motion(x))
        }
        Modality::BoneMotion => Ok(motion(&bones(x, parents)?)),
    }
}
