//! Runs an untrained model on one synthetic sample and prints the mixed
//! spatial map of each group together with its row sums.
//!
//! cargo run --release --example attention_maps

use freqmix::data::{synth_confusable, SynthSpec};
use freqmix::model::{FreqMixFormer, ModelConfig};

fn main() -> freqmix::Result<()> {
    let spec = SynthSpec {
        joints: 6,
        frames: 16,
        num_enhanced: 4,
        jitter_joints: vec![1, 4],
        train: 4,
        test: 0,
        ..SynthSpec::default()
    };
    let ds = synth_confusable(&spec, 0)?;
    let cfg = ModelConfig {
        joints: 6,
        frames: 16,
        channels: 12,
        groups: 3,
        depth: 1,
        num_enhanced: 4,
        num_classes: 2,
        ..ModelConfig::default()
    };
    let model = FreqMixFormer::new(cfg, 0)?;
    let maps = model.attention_maps(&ds.samples[0].data)?;
    for (i, ms) in maps[0].spatial.iter().enumerate() {
        println!("group {i} mixed spatial map");
        for r in 0..ms.shape()[0] {
            let row: Vec<f64> = (0..ms.shape()[1]).map(|c| ms.get(&[r, c])).collect();
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            println!("  {}  sum {:.3}", cells.join(" "), row.iter().sum::<f64>());
        }
    }
    if let Some(t) = &maps[0].temporal {
        println!("frame attention: {:?}", t.shape());
    }
    println!("fused maps per group: {:?}", maps[0].fused[0].shape());
    Ok(())
}
