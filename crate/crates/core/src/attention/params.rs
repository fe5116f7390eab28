//! Parameter bundles for the attention blocks.
//!
//! Each bundle is generic over its handle so the same layout serves as
//! [`ParamId`](crate::numerics::ParamId)s inside a model and as tape
//! [`Var`](crate::numerics::Var)s during a pass.

use crate::error::Result;
use crate::numerics::{ParamId, ParamStore, Rng, Tape, Tensor, Var};

/// Query/key projections `linear(C'→d)` with bias for one group in one branch.
#[derive(Clone, Debug)]
pub struct QkProjection<T> {
    pub w_q: T,
    pub b_q: T,
    pub w_k: T,
    pub b_k: T,
}

/// Weights of the spatial and frequency mixed-attention branches plus the value path.
#[derive(Clone, Debug)]
pub struct MixedBlockParams<T> {
    pub spatial: Vec<QkProjection<T>>,
    pub frequency: Vec<QkProjection<T>>,
    /// 1×1 channel convolution `[C×C]` producing the value tensor.
    pub w_v: T,
    pub b_v: T,
}

/// Frame-token projections and the 1×1 value convolution of the temporal block.
#[derive(Clone, Debug)]
pub struct TemporalParams<T> {
    /// `[1×d_t]`: per-frame average token to query.
    pub w_q: T,
    pub b_q: T,
    /// `[1×d_t]`: per-frame max token to key.
    pub w_k: T,
    pub b_k: T,
    /// `[C×C]`, bias-free.
    pub w_v: T,
}

/// Squeeze-excitation gate followed by a multiscale temporal convolution stack.
#[derive(Clone, Debug)]
pub struct ChannelTransformParams<T> {
    /// `[C×C/r]`, `[C/r]`.
    pub gate_w1: T,
    pub gate_b1: T,
    /// `[C/r×C]`, `[C]`.
    pub gate_w2: T,
    pub gate_b2: T,
    /// `[C×C×3]` kernels at dilation 1 and 2.
    pub conv1_w: T,
    pub conv1_b: T,
    pub conv2_w: T,
    pub conv2_b: T,
    /// `[3C×C]` re-projection of the concatenated {identity, dil-1, dil-2} branches.
    pub proj_w: T,
    pub proj_b: T,
}

/// Bias-free projections of the partial/full DCT attention variants.
#[derive(Clone, Debug)]
pub struct DctAttentionParams<T> {
    pub w_q: T,
    pub w_k: T,
    pub w_v: T,
}

impl<T> QkProjection<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> QkProjection<U> {
        QkProjection {
            w_q: f(&self.w_q),
            b_q: f(&self.b_q),
            w_k: f(&self.w_k),
            b_k: f(&self.b_k),
        }
    }
}

impl<T> MixedBlockParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> MixedBlockParams<U> {
        MixedBlockParams {
            spatial: self.spatial.iter().map(|p| p.map(&mut f)).collect(),
            frequency: self.frequency.iter().map(|p| p.map(&mut f)).collect(),
            w_v: f(&self.w_v),
            b_v: f(&self.b_v),
        }
    }
}

impl<T> TemporalParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> TemporalParams<U> {
        TemporalParams {
            w_q: f(&self.w_q),
            b_q: f(&self.b_q),
            w_k: f(&self.w_k),
            b_k: f(&self.b_k),
            w_v: f(&self.w_v),
        }
    }
}

impl<T> ChannelTransformParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ChannelTransformParams<U> {
        ChannelTransformParams {
            gate_w1: f(&self.gate_w1),
            gate_b1: f(&self.gate_b1),
            gate_w2: f(&self.gate_w2),
            gate_b2: f(&self.gate_b2),
            conv1_w: f(&self.conv1_w),
            conv1_b: f(&self.conv1_b),
            conv2_w: f(&self.conv2_w),
            conv2_b: f(&self.conv2_b),
            proj_w: f(&self.proj_w),
            proj_b: f(&self.proj_b),
        }
    }
}

impl<T> DctAttentionParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> DctAttentionParams<U> {
        DctAttentionParams {
            w_q: f(&self.w_q),
            w_k: f(&self.w_k),
            w_v: f(&self.w_v),
        }
    }
}

/// Binds stored parameters onto a tape.
pub(crate) fn binder<'a>(tape: &'a Tape, store: &'a ParamStore) -> impl FnMut(&ParamId) -> Var + 'a {
    move |id| tape.param(store, *id)
}

/// Registers freshly initialised weights under a common name prefix.
pub(crate) struct Init<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut Rng,
    pub prefix: String,
}

impl Init<'_> {
    pub fn weight(&mut self, name: &str, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<ParamId> {
        let value = self.rng.xavier(shape, fan_in, fan_out);
        self.store.add(format!("{}.{name}", self.prefix), value)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.store.add(format!("{}.{name}", self.prefix), Tensor::zeros(shape))
    }

    pub fn qk(&mut self, name: &str, width_in: usize, width_out: usize) -> Result<QkProjection<ParamId>> {
        Ok(QkProjection {
            w_q: self.weight(&format!("{name}.w_q"), &[width_in, width_out], width_in, width_out)?,
            b_q: self.zeros(&format!("{name}.b_q"), &[width_out])?,
            w_k: self.weight(&format!("{name}.w_k"), &[width_in, width_out], width_in, width_out)?,
            b_k: self.zeros(&format!("{name}.b_k"), &[width_out])?,
        })
    }
}

impl MixedBlockParams<ParamId> {
    /// `groups` query/key pairs per branch mapping `C/groups → d`, plus a `C×C` value conv.
    /// The frequency branch is left empty when `frequency` is false.
    pub(crate) fn init(init: &mut Init<'_>, channels: usize, groups: usize, d: usize, frequency: bool) -> Result<Self> {
        let width = channels / groups;
        let spatial = (0..groups)
            .map(|i| init.qk(&format!("sab.{i}"), width, d))
            .collect::<Result<_>>()?;
        let frequency = if frequency {
            (0..groups)
                .map(|i| init.qk(&format!("fab.{i}"), width, d))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            spatial,
            frequency,
            w_v: init.weight("value.w", &[channels, channels], channels, channels)?,
            b_v: init.zeros("value.b", &[channels])?,
        })
    }
}

impl TemporalParams<ParamId> {
    pub(crate) fn init(init: &mut Init<'_>, channels: usize, d_t: usize) -> Result<Self> {
        let w_v = init.weight("tab.value.w", &[channels, channels], channels, channels)?;
        Ok(Self {
            w_q: init.weight("tab.w_q", &[1, d_t], 1, d_t)?,
            b_q: init.zeros("tab.b_q", &[d_t])?,
            w_k: init.weight("tab.w_k", &[1, d_t], 1, d_t)?,
            b_k: init.zeros("tab.b_k", &[d_t])?,
            w_v,
        })
    }
}

impl ChannelTransformParams<ParamId> {
    pub(crate) fn init(init: &mut Init<'_>, channels: usize, reduction: usize) -> Result<Self> {
        let hidden = (channels / reduction).max(1);
        let c = channels;
        Ok(Self {
            gate_w1: init.weight("ct.gate.w1", &[c, hidden], c, hidden)?,
            gate_b1: init.zeros("ct.gate.b1", &[hidden])?,
            gate_w2: init.weight("ct.gate.w2", &[hidden, c], hidden, c)?,
            gate_b2: init.zeros("ct.gate.b2", &[c])?,
            conv1_w: init.weight("ct.conv1.w", &[c, c, 3], 3 * c, 3 * c)?,
            conv1_b: init.zeros("ct.conv1.b", &[c])?,
            conv2_w: init.weight("ct.conv2.w", &[c, c, 3], 3 * c, 3 * c)?,
            conv2_b: init.zeros("ct.conv2.b", &[c])?,
            proj_w: init.weight("ct.proj.w", &[3 * c, c], 3 * c, c)?,
            proj_b: init.zeros("ct.proj.b", &[c])?,
        })
    }
}

impl DctAttentionParams<ParamId> {
    pub(crate) fn init(init: &mut Init<'_>, name: &str, width: usize, d: usize) -> Result<Self> {
        Ok(Self {
            w_q: init.weight(&format!("{name}.w_q"), &[width, d], width, d)?,
            w_k: init.weight(&format!("{name}.w_k"), &[width, d], width, d)?,
            w_v: init.weight(&format!("{name}.w_v"), &[width, width], width, width)?,
        })
    }
}
