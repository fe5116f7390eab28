//! Spatial, frequency-aware and temporal attention blocks.
//!
//! Shape conventions: group features are `[J×C'×F]`; spatial maps are
//! `[J×J]`; frequency-branch stacks are `[F×J×J]`, indexed by bin before the
//! inverse transform and by frame after it. Mixed maps add a group's
//! self-attention to the cross-attention maps shared with its neighbours;
//! neighbours outside `1..=n` are omitted.

mod dct_variants;
mod mixed;
mod params;
mod temporal;
mod value;

pub use dct_variants::{full_dct_attention, partial_dct_attention};
pub use mixed::{frequency_self_and_mixed, spatial_self_and_mixed, FrequencyMaps, MixedMaps};
pub use params::{
    ChannelTransformParams, DctAttentionParams, MixedBlockParams, QkProjection, TemporalParams,
};
pub use temporal::{channel_gate, channel_transform, temporal_attention, temporal_mix, TemporalOutput};
pub use value::{apply_fused, apply_value, fuse_and_concat, value_projection, FusedMap};

pub(crate) use params::{binder, Init};
