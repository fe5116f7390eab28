//! Builds the orthonormal cosine basis, round-trips a trajectory through it
//! and applies the frequency operator to its coefficients.
//!
//! cargo run --release --example spectral_basis

use freqmix::numerics::Tensor;
use freqmix::spectral::{
    dct_forward, frequency_operator, idct, spectral_energy, spectral_residuals, FrequencyOperatorConfig, SpectralBasis,
};

fn main() -> freqmix::Result<()> {
    let frames = 16;
    let basis = SpectralBasis::new(frames)?;

    // a slow swing plus a fast tremor
    let x = Tensor::from_fn(&[1, frames], |ix| {
        let t = ix[1] as f64 / frames as f64;
        (std::f64::consts::TAU * t).sin() + 0.2 * (std::f64::consts::TAU * 6.0 * t).sin()
    });
    let c = dct_forward(&x, &basis)?;
    println!("energy per bin:");
    for (k, e) in spectral_energy(&c).data().iter().enumerate() {
        println!("  {k:2} {e:.4}");
    }

    let op = FrequencyOperatorConfig::new(4, 0.5)?;
    println!("operator factors: {:?}", op.factors(frames)?);
    let boosted = frequency_operator(&c.reshape(&[frames, 1])?, &op)?.reshape(&[1, frames])?;
    let y = idct(&boosted, &basis)?;
    println!("max |x - idct(dct(x))| = {:e}", idct(&c, &basis)?.max_abs_diff(&x));
    println!("max change after the operator = {:.4}", y.max_abs_diff(&x));

    println!("frames,orthonormality,round_trip,parseval");
    for f in [4, 8, 16, 64] {
        let r = spectral_residuals(f, 100, 0)?;
        println!("{f},{:e},{:e},{:e}", r.orthonormality, r.round_trip, r.parseval);
    }
    Ok(())
}
