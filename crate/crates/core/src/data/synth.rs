//! Confusable-action generator: every class shares the same smooth motion and
//! classes differ only by a high-frequency tremor on a few joints.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::parse_value;
use crate::numerics::{Rng, Tensor};

use super::{Dataset, Sample, Split};

/// Number of low-frequency bins carrying the shared base motion.
pub const BASE_BINS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub joints: usize,
    pub frames: usize,
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    /// Joints that carry the class tremor.
    pub jitter_joints: Vec<usize>,
    /// Peak amplitude of the tremor.
    pub jitter_amp: f64,
    /// Standard deviation of additive observation noise.
    pub noise: f64,
    /// Width of the high-frequency band the tremors live in.
    pub num_enhanced: usize,
    /// Standard deviation of the base motion's cosine coefficients.
    pub base_amp: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            joints: 25,
            frames: 64,
            classes: 2,
            train: 400,
            test: 200,
            jitter_joints: vec![7, 11],
            jitter_amp: 1.0,
            noise: 0.02,
            num_enhanced: 12,
            base_amp: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {}", self.classes)));
        }
        if !(self.jitter_amp > 0.0 && self.jitter_amp.is_finite()) {
            return Err(Error::invalid("jitter_amp must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.base_amp >= 0.0 && self.base_amp.is_finite()) {
            return Err(Error::invalid("noise and base_amp must be non-negative"));
        }
        if self.jitter_joints.is_empty() {
            return Err(Error::invalid("jitter_joints must not be empty"));
        }
        if let Some(&j) = self.jitter_joints.iter().find(|&&j| j >= self.joints) {
            return Err(Error::invalid(format!("jitter joint {j} out of range for {} joints", self.joints)));
        }
        if self.num_enhanced == 0 || self.num_enhanced + BASE_BINS > self.frames {
            return Err(Error::invalid(format!(
                "num_enhanced must lie in 1..={} for {} frames",
                self.frames.saturating_sub(BASE_BINS),
                self.frames
            )));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "joints" => self.joints = parse_value(key, value)?,
            "frames" => self.frames = parse_value(key, value)?,
            "classes" => self.classes = parse_value(key, value)?,
            "train" => self.train = parse_value(key, value)?,
            "test" => self.test = parse_value(key, value)?,
            "jitter_joints" => {
                self.jitter_joints = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_value(key, v))
                    .collect::<Result<_>>()?
            }
            "jitter_amp" => self.jitter_amp = parse_value(key, value)?,
            "noise" => self.noise = parse_value(key, value)?,
            "num_enhanced" => self.num_enhanced = parse_value(key, value)?,
            "base_amp" => self.base_amp = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let joints: Vec<String> = self.jitter_joints.iter().map(|j| j.to_string()).collect();
        vec![
            ("joints", self.joints.to_string()),
            ("frames", self.frames.to_string()),
            ("classes", self.classes.to_string()),
            ("train", self.train.to_string()),
            ("test", self.test.to_string()),
            ("jitter_joints", joints.join(",")),
            ("jitter_amp", self.jitter_amp.to_string()),
            ("noise", self.noise.to_string()),
            ("num_enhanced", self.num_enhanced.to_string()),
            ("base_amp", self.base_amp.to_string()),
        ]
    }

    /// `(bin, axis)` of class `k`'s tremor; `bin` is 0-based and above `F − N_c`.
    pub fn signature(&self, k: usize) -> (usize, usize) {
        let band_start = self.frames - self.num_enhanced;
        (band_start + (5 * k) % self.num_enhanced, k % 3)
    }
}

/// Cosine at 0-based bin `bin`, peak value 1, sampled at `frames` points.
fn cosine(bin: usize, frames: usize) -> Vec<f64> {
    (0..frames)
        .map(|f| (PI * (2 * f + 1) as f64 * bin as f64 / (2 * frames) as f64).cos())
        .collect()
}

/// The motion every sample starts from: `[J×3×F]`, energy in bins `0..BASE_BINS`.
pub fn base_motion(spec: &SynthSpec, seed: u64) -> Tensor {
    let mut rng = Rng::with_stream(seed, 0);
    let f = spec.frames;
    let waves: Vec<Vec<f64>> = (0..BASE_BINS).map(|b| cosine(b, f)).collect();
    let mut out = Tensor::zeros(&[spec.joints, 3, f]);
    for j in 0..spec.joints {
        for c in 0..3 {
            let coeffs: Vec<f64> = (0..BASE_BINS).map(|_| spec.base_amp * rng.normal()).collect();
            for ff in 0..f {
                let v = (0..BASE_BINS).map(|b| coeffs[b] * waves[b][ff]).sum();
                out.set(&[j, c, ff], v);
            }
        }
    }
    out
}

/// Base motion plus class `label`'s tremor, without noise.
pub fn clean_sample(spec: &SynthSpec, base: &Tensor, label: usize) -> Tensor {
    let (bin, axis) = spec.signature(label);
    let wave = cosine(bin, spec.frames);
    let mut out = base.clone();
    for &j in &spec.jitter_joints {
        for (f, w) in wave.iter().enumerate() {
            let v = out.get(&[j, axis, f]) + spec.jitter_amp * w;
            out.set(&[j, axis, f], v);
        }
    }
    out
}

/// Balanced labels, `train` then `test` samples; each sample draws its noise
/// from its own stream so generation is order-independent.
pub fn synth_confusable(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let base = base_motion(spec, seed);
    let total = spec.train + spec.test;
    let samples: Vec<Sample> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::with_stream(seed, i as u64 + 1);
            let label = i % spec.classes;
            let mut noisy = clean_sample(spec, &base, label);
            if spec.noise > 0.0 {
                noisy.data_mut().iter_mut().for_each(|v| *v += spec.noise * rng.normal());
            }
            let split = if i < spec.train { Split::Train } else { Split::Test };
            Sample {
                data: noisy,
                label,
                split,
                source: format!("synth:{seed}:{i}"),
            }
        })
        .collect();
    let mut ds = Dataset::new(spec.joints, 3, spec.frames, spec.classes);
    for s in samples {
        ds.push(s)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dct_forward, SpectralBasis};

    fn small() -> SynthSpec {
        SynthSpec {
            joints: 6,
            frames: 32,
            classes: 3,
            train: 12,
            test: 6,
            jitter_joints: vec![2, 4],
            jitter_amp: 0.1,
            noise: 0.0,
            num_enhanced: 8,
            base_amp: 1.0,
        }
    }

    #[test]
    fn low_bins_agree_across_classes() {
        let spec = small();
        let ds = synth_confusable(&spec, 5).unwrap();
        let basis = SpectralBasis::new(spec.frames).unwrap();
        let coeffs: Vec<Tensor> = ds.samples.iter().map(|s| dct_forward(&s.data, &basis).unwrap()).collect();
        let low = |t: &Tensor| t.slice_axis(2, 0, BASE_BINS).unwrap();
        for c in &coeffs[1..] {
            assert!(low(c).max_abs_diff(&low(&coeffs[0])) < 1e-12);
        }
        // the shared base itself is bit-identical for every class
        let base = base_motion(&spec, 5);
        assert_eq!(base, base_motion(&spec, 5));
    }

    #[test]
    fn class_differences_live_in_the_high_band() {
        let spec = small();
        let base = base_motion(&spec, 6);
        let basis = SpectralBasis::new(spec.frames).unwrap();
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let diff = clean_sample(&spec, &base, a).sub(&clean_sample(&spec, &base, b)).unwrap();
            let c = dct_forward(&diff, &basis).unwrap();
            let total: f64 = c.data().iter().map(|v| v * v).sum();
            let high = c.slice_axis(2, spec.frames - spec.num_enhanced, spec.num_enhanced).unwrap();
            let high: f64 = high.data().iter().map(|v| v * v).sum();
            assert!(high / total >= 0.99, "{a} vs {b}: {}", high / total);
        }
    }

    #[test]
    fn signatures_are_distinct_and_in_band() {
        let spec = SynthSpec::default();
        let sigs: Vec<_> = (0..6).map(|k| spec.signature(k)).collect();
        for (i, s) in sigs.iter().enumerate() {
            assert!(s.0 >= spec.frames - spec.num_enhanced && s.0 < spec.frames);
            assert!(!sigs[..i].contains(s));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec { noise: 0.05, ..small() };
        let a = synth_confusable(&spec, 7).unwrap();
        let b = synth_confusable(&spec, 7).unwrap();
        let c = synth_confusable(&spec, 8).unwrap();
        assert_eq!(a.encode(), b.encode());
        assert_ne!(a.encode(), c.encode());
        assert_eq!(a.count(Split::Train), 12);
        assert_eq!(a.count(Split::Test), 6);
        assert!((0..3).all(|k| a.samples.iter().filter(|s| s.label == k).count() == 6));
    }

    #[test]
    fn low_pass_removes_class_information() {
        let spec = SynthSpec {
            noise: 0.01,
            train: 60,
            test: 0,
            classes: 2,
            ..small()
        };
        let ds = synth_confusable(&spec, 9).unwrap();
        let basis = SpectralBasis::new(spec.frames).unwrap();
        let cut = spec.frames - spec.num_enhanced;
        let mut means = vec![Tensor::zeros(&[spec.joints, 3, cut]); 2];
        for s in &ds.samples {
            let low = dct_forward(&s.data, &basis).unwrap().slice_axis(2, 0, cut).unwrap();
            means[s.label] = means[s.label].add(&low.scale(1.0 / 30.0)).unwrap();
        }
        // 5σ of the mean of 30 unit-variance coefficients scaled by the noise level
        let floor = 5.0 * spec.noise * (2.0f64 / 30.0).sqrt();
        assert!(means[0].max_abs_diff(&means[1]) < floor);
    }

    #[test]
    fn key_values_round_trip() {
        let mut s = SynthSpec::default();
        assert!(s.set("jitter_joints", "1,2,3").unwrap());
        assert!(s.set("jitter_amp", "0.25").unwrap());
        assert!(!s.set("phi", "0.5").unwrap());
        assert!(s.set("classes", "two").is_err());
        let mut t = SynthSpec::default();
        for (k, v) in s.entries() {
            assert!(t.set(k, &v).unwrap());
        }
        assert_eq!(s, t);
    }

    #[test]
    fn degenerate_specs_rejected() {
        for bad in [
            SynthSpec { classes: 1, ..small() },
            SynthSpec { jitter_amp: 0.0, ..small() },
            SynthSpec { jitter_joints: vec![], ..small() },
            SynthSpec { jitter_joints: vec![6], ..small() },
            SynthSpec { num_enhanced: 29, ..small() },
        ] {
            assert!(synth_confusable(&bad, 0).is_err());
        }
    }
}
