//! Trains the full model and two ablations on the confusable synthetic task
//! and prints test accuracy per seed.
//!
//! cargo run --release --example synthetic_ablation -- [seeds] [epochs]

use std::time::Instant;

use freqmix::data::{synth_confusable, SynthSpec};
use freqmix::model::ModelConfig;
use freqmix::pipeline::{run_experiment, TrainingSchedule};

fn main() -> freqmix::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let spec = SynthSpec::default();
    let base = ModelConfig {
        joints: spec.joints,
        frames: spec.frames,
        channels: 8,
        groups: 2,
        depth: 1,
        num_classes: spec.classes,
        num_enhanced: spec.num_enhanced,
        ..ModelConfig::default()
    };
    let variants = [
        ("full", base.clone()),
        ("no_fo", ModelConfig { fo: false, ..base.clone() }),
        ("no_fab", ModelConfig { fab: false, fo: false, ..base.clone() }),
    ];
    for seed in 0..seeds {
        let ds = synth_confusable(&spec, seed)?;
        let schedule = TrainingSchedule {
            epochs,
            batch_size: 16,
            base_lr: 0.03,
            warmup_epochs: 1,
            decay_milestones: vec![epochs * 3 / 4],
            seed,
            ..TrainingSchedule::default()
        };
        for (name, cfg) in &variants {
            let start = Instant::now();
            let run = run_experiment(cfg, &schedule, &ds)?;
            let last = run.report.log.last().unwrap();
            println!(
                "seed {seed} {name:7} test {:.3} train {:.3} loss {:.4} ({:.1}s)",
                run.metrics.top1,
                last.train_acc,
                last.loss,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
