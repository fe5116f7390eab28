//! Central-difference check of every parameter of the tiny model.
//!
//! cargo run --release --example grad_check -- [seed]

use freqmix::model::{FreqMixFormer, ModelConfig};
use freqmix::numerics::{Rng, Tensor};
use freqmix::pipeline::grad_check;

fn main() -> freqmix::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = ModelConfig::tiny();
    let model = FreqMixFormer::new(cfg.clone(), seed)?;
    let mut rng = Rng::with_stream(seed, 7);
    let x = Tensor::from_fn(&[cfg.joints, cfg.in_channels, cfg.frames], |_| rng.normal());
    let r = grad_check(&model, &x, 0, 1e-5)?;
    println!(
        "{} entries, max relative error {:e} at {}[{}], {} kink(s)",
        r.checked, r.max_rel_err, r.worst_param, r.worst_index, r.kinks
    );
    Ok(())
}
