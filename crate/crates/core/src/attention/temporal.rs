use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};

use super::{ChannelTransformParams, TemporalParams};

fn check_jcf(tape: &Tape, x: Var, op: &'static str) -> Result<[usize; 3]> {
    let s = tape.shape(x);
    match s[..] {
        [j, c, f] => Ok([j, c, f]),
        _ => Err(Error::invalid(format!("{op} expects J×C×F, got {s:?}"))),
    }
}

/// Channel gate: `sigmoid(W2·ReLU(W1·mean_{J,F}(x) + b1) + b2)`, one entry per channel.
pub fn channel_gate(tape: &Tape, x: Var, p: &ChannelTransformParams<Var>) -> Result<Var> {
    check_jcf(tape, x, "channel_gate")?;
    let over_frames = tape.mean_axis(x, 2)?;
    let pooled = tape.mean_axis(over_frames, 0)?;
    let h = tape.linear(pooled, p.gate_w1, p.gate_b1)?;
    let h = tape.relu(h)?;
    let z = tape.linear(h, p.gate_w2, p.gate_b2)?;
    tape.sigmoid(z)
}

/// Gate the channels, run {identity, dilation-1, dilation-2} temporal branches,
/// concatenate them and project back to `C` channels.
pub fn channel_transform(tape: &Tape, x: Var, p: &ChannelTransformParams<Var>) -> Result<Var> {
    let [_, c, _] = check_jcf(tape, x, "channel_transform")?;
    let w_shape = tape.shape(p.proj_w);
    if w_shape != [3 * c, c] {
        return Err(Error::shape("channel_transform", &[c], &w_shape));
    }
    let gate = channel_gate(tape, x, p)?;
    let gated = tape.scale_along_axis(x, 1, gate)?;
    let d1 = tape.temporal_conv(gated, p.conv1_w, 1)?;
    let d1 = tape.add_along_axis(d1, 1, p.conv1_b)?;
    let d2 = tape.temporal_conv(gated, p.conv2_w, 2)?;
    let d2 = tape.add_along_axis(d2, 1, p.conv2_b)?;
    let stacked = tape.concat(&[gated, d1, d2], 1)?;
    let out = tape.contract_axis(stacked, 1, p.proj_w)?;
    tape.add_along_axis(out, 1, p.proj_b)
}

/// Intermediate and final tensors of the temporal block.
#[derive(Clone, Copy, Debug)]
pub struct TemporalOutput {
    /// `[F×F]` softmax attention between frames.
    pub attention: Var,
    /// `[F×F]` elementwise sigmoid of `attention`.
    pub weights: Var,
    /// `[J×C×F]` value tensor.
    pub value: Var,
    pub output: Var,
}

/// Frame attention on an already channel-transformed input `X_t`.
pub fn temporal_mix(tape: &Tape, xt: Var, p: &TemporalParams<Var>) -> Result<TemporalOutput> {
    let [j, c, f] = check_jcf(tape, xt, "temporal_attention")?;
    let frames_first = tape.permute(xt, &[2, 0, 1])?;
    let flat = tape.reshape(frames_first, &[f, j * c])?;
    let avg = tape.mean_axis(flat, 1)?;
    let avg = tape.reshape(avg, &[f, 1])?;
    let max = tape.max_axis(flat, 1)?;
    let max = tape.reshape(max, &[f, 1])?;
    let q = tape.linear(avg, p.w_q, p.b_q)?;
    let q = tape.relu(q)?;
    let k = tape.linear(max, p.w_k, p.b_k)?;
    let k = tape.relu(k)?;
    let d_t = tape.shape(p.w_q)[1] as f64;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let attention = tape.scaled_softmax(scores, d_t)?;
    let weights = tape.sigmoid(attention)?;
    let value = tape.contract_axis(xt, 1, p.w_v)?;
    // out[:, :, f] = Σ_g weights[f][g]·value[:, :, g]
    let wt = tape.transpose(weights)?;
    let output = tape.contract_axis(value, 2, wt)?;
    Ok(TemporalOutput {
        attention,
        weights,
        value,
        output,
    })
}

/// Channel transform followed by frame attention.
pub fn temporal_attention(
    tape: &Tape,
    x: Var,
    p: &TemporalParams<Var>,
    ct: &ChannelTransformParams<Var>,
) -> Result<TemporalOutput> {
    let xt = channel_transform(tape, x, ct)?;
    temporal_mix(tape, xt, p)
}
