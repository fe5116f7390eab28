//! Training, evaluation, score fusion, gradient checking and reporting.

mod gradcheck;
mod metrics;
mod schedule;
mod train;

pub use gradcheck::{
    grad_check, grad_check_with, relative_error, GradCheckReport, GRAD_CHECK_WARN_PARAMS, KINK_GAP, RELATIVE_FLOOR,
};
pub use metrics::{argmax, difficulty_report, ensemble, evaluate, softmax, DifficultyReport, Metrics, ScoreFile};
pub use schedule::TrainingSchedule;
pub use train::{train, EpochLog, TrainOutput, TrainReport};

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{kv_lines, FreqMixFormer, ModelConfig};

/// Short hex digest naming an output directory after the resolved configuration.
/// First 8 bytes of the SHA-256 of `text`, as hex.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

/// Result of one train-then-evaluate run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub report: TrainReport,
    pub metrics: Metrics,
    pub scores: ScoreFile,
    pub model: FreqMixFormer,
}

/// Builds a model from `config` (weights seeded by `schedule.seed`), trains it
/// in memory and evaluates the test split.
pub fn run_experiment(config: &ModelConfig, schedule: &TrainingSchedule, ds: &Dataset) -> Result<Experiment> {
    let mut model = FreqMixFormer::new(config.clone(), schedule.seed)?;
    let report = train(&mut model, ds, schedule, &TrainOutput::default())?;
    let (metrics, scores) = evaluate(&model, ds, Split::Test)?;
    Ok(Experiment {
        report,
        metrics,
        scores,
        model,
    })
}

/// Model and schedule keys in one `key=value` file; the two key sets are disjoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub schedule: TrainingSchedule,
}

impl RunConfig {
    /// Routes a key to the model or the schedule; `Ok(false)` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        Ok(self.model.set(key, value)? || self.schedule.set(key, value)?)
    }

    /// Applies every line of a `key=value` text over the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value, line) in kv_lines(text)? {
            let known = self.set(key, value).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            if !known {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key {key:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.schedule.validate()
    }

    pub fn to_text(&self) -> String {
        self.model
            .entries()
            .into_iter()
            .chain(self.schedule.entries())
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("phi=0.3\nepochs=7\n# comment\n\nwarmup_epochs=1\ndecay_milestones=2,4\n").unwrap();
        assert_eq!(cfg.model.phi, 0.3);
        assert_eq!(cfg.schedule.epochs, 7);
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        let err = RunConfig::default().apply_text("phi=0.5\nbogus=1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn key_sets_are_disjoint() {
        let m: Vec<_> = ModelConfig::default().entries().into_iter().map(|(k, _)| k).collect();
        let s: Vec<_> = TrainingSchedule::default().entries().into_iter().map(|(k, _)| k).collect();
        assert!(m.iter().all(|k| !s.contains(k)));
    }

    #[test]
    fn hash_is_short_and_stable() {
        assert_eq!(config_hash("a"), config_hash("a"));
        assert_ne!(config_hash("a"), config_hash("b"));
        assert_eq!(config_hash("").len(), 16);
    }
}
