//! Orthonormal DCT-II along the frame axis and the per-bin frequency operator.
//!
//! Bins are documented 1-based (bin 1 is DC, bin `F` the highest frequency);
//! storage is 0-based, so bin `i` lives at index `i - 1`.

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// The `F×F` orthonormal DCT-II matrix: `basis[i][f] = √(2/F)·s_i·cos(π(2f+1)i/(2F))`
/// (0-based), with `s_0 = 1/√2` and `s_i = 1` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    frames: usize,
    matrix: Tensor,
}

impl SpectralBasis {
    pub fn new(frames: usize) -> Result<Self> {
        if frames == 0 {
            return Err(Error::invalid("spectral basis needs at least one frame"));
        }
        let f_len = frames as f64;
        let norm = (2.0 / f_len).sqrt();
        let matrix = Tensor::from_fn(&[frames, frames], |ix| {
            let (i, f) = (ix[0] as f64, ix[1] as f64);
            let s = if ix[0] == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            norm * s * (std::f64::consts::PI * (2.0 * f + 1.0) * i / (2.0 * f_len)).cos()
        });
        Ok(Self { frames, matrix })
    }

    /// Replaces the cosine basis with the identity; turns the transform into a no-op.
    pub fn identity(frames: usize) -> Self {
        Self {
            frames,
            matrix: Tensor::eye(frames),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Row `i` is the `i`-th cosine atom.
    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    /// Contraction weights for the forward transform along an axis (`Bᵀ`).
    pub(crate) fn forward_weights(&self) -> Tensor {
        self.matrix.transpose().expect("square")
    }

    /// Contraction weights for the inverse transform along an axis (`B`).
    pub(crate) fn inverse_weights(&self) -> &Tensor {
        &self.matrix
    }

    fn check(&self, op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
        if shape.get(axis) != Some(&self.frames) {
            return Err(Error::shape(op, shape, &[self.frames]));
        }
        Ok(())
    }

    /// `c = B·x` along `axis` on the tape.
    pub fn forward_on(&self, tape: &Tape, x: Var, axis: usize) -> Result<Var> {
        self.check("dct_forward", &tape.shape(x), axis)?;
        let w = tape.constant(self.forward_weights());
        tape.contract_axis(x, axis, w)
    }

    /// `x = Bᵀ·c` along `axis` on the tape.
    pub fn inverse_on(&self, tape: &Tape, c: Var, axis: usize) -> Result<Var> {
        self.check("idct", &tape.shape(c), axis)?;
        let w = tape.constant(self.inverse_weights().clone());
        tape.contract_axis(c, axis, w)
    }

    /// `max|B·Bᵀ − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let bbt = self
            .matrix
            .matmul(&self.matrix.transpose().expect("square"))
            .expect("square");
        bbt.max_abs_diff(&Tensor::eye(self.frames))
    }
}

/// Forward DCT of every trailing length-`F` vector.
pub fn dct_forward(x: &Tensor, basis: &SpectralBasis) -> Result<Tensor> {
    let axis = last_axis(x)?;
    basis.check("dct_forward", x.shape(), axis)?;
    x.contract_axis(axis, &basis.forward_weights())
}

/// Inverse DCT of every trailing length-`F` coefficient vector.
pub fn idct(c: &Tensor, basis: &SpectralBasis) -> Result<Tensor> {
    let axis = last_axis(c)?;
    basis.check("idct", c.shape(), axis)?;
    c.contract_axis(axis, basis.inverse_weights())
}

fn last_axis(x: &Tensor) -> Result<usize> {
    x.rank()
        .checked_sub(1)
        .ok_or_else(|| Error::invalid("transform of a scalar"))
}

/// Elementwise squared coefficients.
pub fn spectral_energy(c: &Tensor) -> Tensor {
    c.map(|v| v * v)
}

/// Parameters of the per-bin frequency operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyOperatorConfig {
    /// Number of enhanced high-frequency bins (the top `num_enhanced` bins).
    pub num_enhanced: usize,
    pub phi: f64,
}

impl FrequencyOperatorConfig {
    pub fn new(num_enhanced: usize, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::invalid(format!("phi must lie in (0, 1), got {phi}")));
        }
        Ok(Self { num_enhanced, phi })
    }

    /// Per-bin multipliers for `frames` bins: `1+φ` on the top `N_c` bins, `φ` below.
    pub fn factors(&self, frames: usize) -> Result<Vec<f64>> {
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::invalid(format!("phi must lie in (0, 1), got {}", self.phi)));
        }
        if self.num_enhanced > frames {
            return Err(Error::invalid(format!(
                "N_c = {} exceeds the {frames} available bins",
                self.num_enhanced
            )));
        }
        let first_high = frames - self.num_enhanced;
        Ok((0..frames)
            .map(|i| if i >= first_high { 1.0 + self.phi } else { self.phi })
            .collect())
    }

    /// True when 0-based bin `index` is in the enhanced band.
    pub fn is_high(&self, index: usize, frames: usize) -> bool {
        index + self.num_enhanced >= frames
    }
}

/// Scales slices along the leading (bin) axis of `c` per the operator.
pub fn frequency_operator(c: &Tensor, cfg: &FrequencyOperatorConfig) -> Result<Tensor> {
    let frames = *c
        .shape()
        .first()
        .ok_or_else(|| Error::invalid("frequency operator on a scalar"))?;
    c.scale_along_axis(0, &cfg.factors(frames)?)
}

/// Tape form of [`frequency_operator`], acting on `axis`.
pub fn frequency_operator_on(tape: &Tape, c: Var, axis: usize, cfg: &FrequencyOperatorConfig) -> Result<Var> {
    let shape = tape.shape(c);
    let frames = *shape.get(axis).ok_or(Error::Axis {
        op: "frequency_operator",
        axis,
        rank: shape.len(),
    })?;
    let factors = tape.constant(Tensor::new(vec![frames], cfg.factors(frames)?)?);
    tape.scale_along_axis(c, axis, factors)
}

/// Residuals reported by the spectral self-check.
#[derive(Clone, Copy, Debug)]
pub struct SpectralResiduals {
    pub frames: usize,
    pub orthonormality: f64,
    pub round_trip: f64,
    pub parseval: f64,
}

/// Orthonormality, round-trip and Parseval residuals over `trials` random vectors.
pub fn spectral_residuals(frames: usize, trials: usize, seed: u64) -> Result<SpectralResiduals> {
    let basis = SpectralBasis::new(frames)?;
    let mut rng = crate::numerics::Rng::new(seed);
    let x = rng.uniform_tensor(&[trials, frames], -1.0, 1.0);
    let c = dct_forward(&x, &basis)?;
    let back = idct(&c, &basis)?;
    let mut parseval = 0.0f64;
    for t in 0..trials {
        let xs = &x.data()[t * frames..(t + 1) * frames];
        let cs = &c.data()[t * frames..(t + 1) * frames];
        let ex: f64 = xs.iter().map(|v| v * v).sum();
        let ec: f64 = cs.iter().map(|v| v * v).sum();
        parseval = parseval.max((ec - ex).abs() / ex);
    }
    Ok(SpectralResiduals {
        frames,
        orthonormality: basis.orthonormality_residual(),
        round_trip: back.max_abs_diff(&x),
        parseval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Direct 1-based summation of the forward transform.
    fn dct_sum(x: &[f64]) -> Vec<f64> {
        let f_len = x.len() as f64;
        (1..=x.len())
            .map(|i| {
                let delta = if i == 1 { 1.0 } else { 0.0 };
                (2.0 / f_len).sqrt()
                    * (1..=x.len())
                        .map(|f| {
                            x[f - 1] / (1.0 + delta as f64).sqrt()
                                * (PI * (2.0 * f as f64 - 1.0) * (i as f64 - 1.0) / (2.0 * f_len)).cos()
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    /// Direct 1-based summation of the inverse transform.
    fn idct_sum(c: &[f64]) -> Vec<f64> {
        let f_len = c.len() as f64;
        (1..=c.len())
            .map(|f| {
                (2.0 / f_len).sqrt()
                    * (1..=c.len())
                        .map(|i| {
                            let delta = if i == 1 { 1.0 } else { 0.0 };
                            c[i - 1] / (1.0 + delta as f64).sqrt()
                                * (PI * (2.0 * f as f64 - 1.0) * (i as f64 - 1.0) / (2.0 * f_len)).cos()
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    fn vec4(v: [f64; 4]) -> Tensor {
        Tensor::new(vec![4], v.to_vec()).unwrap()
    }

    #[test]
    fn constant_maps_to_dc() {
        let b = SpectralBasis::new(4).unwrap();
        let c = dct_forward(&vec4([1.0; 4]), &b).unwrap();
        assert!(c.max_abs_diff(&vec4([2.0, 0.0, 0.0, 0.0])) < 1e-12);
        let back = idct(&vec4([2.0, 0.0, 0.0, 0.0]), &b).unwrap();
        assert!(back.max_abs_diff(&vec4([1.0; 4])) < 1e-12);
    }

    #[test]
    fn alternating_sequence_against_summation_oracle() {
        let x = [1.0, -1.0, 1.0, -1.0];
        let oracle = dct_sum(&x);
        for (o, e) in oracle.iter().zip([0.0, 0.76537, 0.0, 1.84776]) {
            assert!((o - e).abs() < 1e-5, "oracle {oracle:?}");
        }
        let b = SpectralBasis::new(4).unwrap();
        let c = dct_forward(&vec4(x), &b).unwrap();
        for (a, o) in c.data().iter().zip(&oracle) {
            assert!((a - o).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_atoms_match_summation() {
        let b = SpectralBasis::new(6).unwrap();
        for i in 0..6 {
            let mut e = vec![0.0; 6];
            e[i] = 1.0;
            let got = idct(&Tensor::new(vec![6], e.clone()).unwrap(), &b).unwrap();
            for (g, o) in got.data().iter().zip(idct_sum(&e)) {
                assert!((g - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthonormal_and_first_row_constant() {
        for f in [4, 8, 16, 64] {
            let b = SpectralBasis::new(f).unwrap();
            assert!(b.orthonormality_residual() < 1e-12, "F={f}");
            let dc = 1.0 / (f as f64).sqrt();
            assert!(b.matrix().data()[..f].iter().all(|v| (v - dc).abs() < 1e-15));
        }
    }

    #[test]
    fn round_trip_random() {
        let r = spectral_residuals(64, 100, 3).unwrap();
        assert!(r.round_trip < 1e-10 && r.parseval < 1e-9, "{r:?}");
    }

    #[test]
    fn sign_changes_follow_bin_index() {
        for f in [4, 8, 16, 64] {
            let b = SpectralBasis::new(f).unwrap();
            for i in 0..f {
                let row = &b.matrix().data()[i * f..(i + 1) * f];
                let changes = row.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
                assert_eq!(changes, i, "F={f}, bin {}", i + 1);
            }
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(spectral_energy(&vec4([2.0, 0.0, 0.0, 0.0])), vec4([4.0, 0.0, 0.0, 0.0]));
        let b = SpectralBasis::new(4).unwrap();
        let e = spectral_energy(&dct_forward(&vec4([1.0, 2.0, 3.0, 4.0]), &b).unwrap());
        let oracle: Vec<f64> = dct_sum(&[1.0, 2.0, 3.0, 4.0]).iter().map(|c| c * c).collect();
        let low = (oracle[0] + oracle[1]) / oracle.iter().sum::<f64>();
        assert!(low > 0.9, "{low}");
        assert!((e.sum() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn frequency_operator_examples() {
        let cfg = FrequencyOperatorConfig::new(1, 0.5).unwrap();
        let out = frequency_operator(&vec4([2.0, 0.0, 0.0, 1.0]), &cfg).unwrap();
        assert_eq!(out, vec4([1.0, 0.0, 0.0, 1.5]));

        let all = FrequencyOperatorConfig::new(4, 0.5).unwrap();
        assert_eq!(frequency_operator(&vec4([1.0, 2.0, 3.0, 4.0]), &all).unwrap(), vec4([1.5, 3.0, 4.5, 6.0]));

        let paper = FrequencyOperatorConfig::new(12, 0.5).unwrap();
        let out = frequency_operator(&Tensor::ones(&[64]), &paper).unwrap();
        assert!(out.data()[..52].iter().all(|&v| v == 0.5));
        assert!(out.data()[52..].iter().all(|&v| v == 1.5));
    }

    #[test]
    fn frequency_operator_errors() {
        assert!(FrequencyOperatorConfig::new(1, 1.0).is_err());
        assert!(FrequencyOperatorConfig::new(1, 0.0).is_err());
        let cfg = FrequencyOperatorConfig::new(5, 0.5).unwrap();
        assert!(frequency_operator(&Tensor::ones(&[4]), &cfg).is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        let b = SpectralBasis::new(4).unwrap();
        assert!(dct_forward(&Tensor::ones(&[5]), &b).is_err());
        assert!(idct(&Tensor::ones(&[2, 3]), &b).is_err());
    }
}
