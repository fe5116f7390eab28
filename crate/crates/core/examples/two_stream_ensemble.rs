//! Trains a joint stream and a bone stream on the synthetic task, then fuses
//! their test scores.
//!
//! cargo run --release --example two_stream_ensemble -- [epochs]

use freqmix::data::{chain_parents, derive_modality, synth_confusable, Dataset, Modality, Split, SynthSpec};
use freqmix::model::ModelConfig;
use freqmix::pipeline::{difficulty_report, ensemble, run_experiment, TrainingSchedule};

fn stream(ds: &Dataset, m: Modality) -> freqmix::Result<Dataset> {
    let parents = chain_parents(ds.joints);
    let mut out = Dataset::new(ds.joints, ds.in_channels, ds.frames, ds.num_classes);
    for s in &ds.samples {
        let mut s = s.clone();
        s.data = derive_modality(&s.data, m, &parents)?;
        out.push(s)?;
    }
    Ok(out)
}

fn main() -> freqmix::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let spec = SynthSpec {
        joints: 10,
        frames: 32,
        num_enhanced: 8,
        jitter_joints: vec![3, 7],
        train: 120,
        test: 60,
        ..SynthSpec::default()
    };
    let joint = synth_confusable(&spec, 0)?;
    let bone = stream(&joint, Modality::Bone)?;
    let cfg = ModelConfig {
        joints: spec.joints,
        frames: spec.frames,
        channels: 8,
        groups: 2,
        depth: 1,
        num_enhanced: spec.num_enhanced,
        num_classes: spec.classes,
        ..ModelConfig::default()
    };
    let schedule = TrainingSchedule {
        epochs,
        batch_size: 16,
        base_lr: 0.03,
        warmup_epochs: 1,
        decay_milestones: vec![epochs * 3 / 4],
        ..TrainingSchedule::default()
    };
    let mut scores = Vec::new();
    for (name, ds) in [("joint", &joint), ("bone", &bone)] {
        let run = run_experiment(&cfg, &schedule, ds)?;
        println!("{name:5} top1 {:.3}", run.metrics.top1);
        scores.push(run.scores);
    }
    let labels: Vec<usize> = joint.split(Split::Test).map(|(_, s)| s.label).collect();
    let fused = ensemble(&scores, &[1.0, 1.0], &labels)?;
    println!("fused top1 {:.3}", fused.top1);
    println!("{:?}", difficulty_report(&fused.per_class));
    Ok(())
}
