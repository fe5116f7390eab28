//! The two ways of placing the value path relative to the cosine transform.
//!
//! Inputs are `[J×C×F]`; queries and keys always come from the transformed
//! input, one `J×J` attention per bin.

use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};
use crate::spectral::SpectralBasis;

use super::DctAttentionParams;

fn per_bin_attention(tape: &Tape, x_bins: Var, p: &DctAttentionParams<Var>) -> Result<Var> {
    let q = tape.contract_axis(x_bins, 2, p.w_q)?;
    let k = tape.contract_axis(x_bins, 2, p.w_k)?;
    let kt = tape.permute(k, &[0, 2, 1])?;
    let scores = tape.bmm(q, kt)?;
    let d = tape.shape(p.w_q)[1] as f64;
    tape.scaled_softmax(scores, d)
}

fn frames_first(tape: &Tape, x: Var, basis: &SpectralBasis) -> Result<Var> {
    let s = tape.shape(x);
    if s.len() != 3 || s[2] != basis.frames() {
        return Err(Error::shape("dct attention", &s, &[basis.frames()]));
    }
    tape.permute(x, &[2, 0, 1])
}

/// Queries/keys in the frequency domain, values in time:
/// `IDCT_bins(softmax(Q̄K̄ᵀ/√d))` applied frame by frame to `V = X·W_v`.
pub fn partial_dct_attention(tape: &Tape, x: Var, p: &DctAttentionParams<Var>, basis: &SpectralBasis) -> Result<Var> {
    let x_frames = frames_first(tape, x, basis)?;
    let coeffs = basis.forward_on(tape, x, 2)?;
    let x_bins = tape.permute(coeffs, &[2, 0, 1])?;
    let attn = per_bin_attention(tape, x_bins, p)?;
    let attn_frames = basis.inverse_on(tape, attn, 0)?;
    let v = tape.contract_axis(x_frames, 2, p.w_v)?;
    let out = tape.bmm(attn_frames, v)?;
    tape.permute(out, &[1, 2, 0])
}

/// Queries, keys and values all in the frequency domain:
/// `IDCT_bins(softmax(Q̄K̄ᵀ/√d)·V̄)`.
pub fn full_dct_attention(tape: &Tape, x: Var, p: &DctAttentionParams<Var>, basis: &SpectralBasis) -> Result<Var> {
    frames_first(tape, x, basis)?;
    let coeffs = basis.forward_on(tape, x, 2)?;
    let x_bins = tape.permute(coeffs, &[2, 0, 1])?;
    let attn = per_bin_attention(tape, x_bins, p)?;
    let v_bins = tape.contract_axis(x_bins, 2, p.w_v)?;
    let product = tape.bmm(attn, v_bins)?;
    let out = basis.inverse_on(tape, product, 0)?;
    tape.permute(out, &[1, 2, 0])
}
