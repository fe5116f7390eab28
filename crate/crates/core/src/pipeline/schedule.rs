use crate::error::{Error, Result};
use crate::model::parse_value;

/// SGD hyper-parameters and the step learning-rate schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    /// 0-based epochs from which one more decay applies.
    pub decay_milestones: Vec<usize>,
    pub decay_factor: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Global gradient-norm bound per step; 0 disables clipping.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            base_lr: 0.1,
            warmup_epochs: 5,
            decay_milestones: vec![35, 55, 75],
            decay_factor: 0.1,
            weight_decay: 0.0005,
            momentum: 0.9,
            grad_clip: 0.0,
            seed: 0,
        }
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v)).collect()
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::invalid(format!("decay_factor must lie in (0, 1], got {}", self.decay_factor)));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("momentum must lie in [0, 1) and weight_decay be non-negative"));
        }
        let m = &self.decay_milestones;
        if m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("milestones must be strictly increasing: {m:?}")));
        }
        if m.last().is_some_and(|&last| last >= self.epochs) {
            return Err(Error::invalid(format!("milestones {m:?} must be below {} epochs", self.epochs)));
        }
        if m.first().is_some_and(|&first| self.warmup_epochs >= first) {
            return Err(Error::invalid("warmup must end before the first milestone"));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::invalid(format!("grad_clip must be non-negative, got {}", self.grad_clip)));
        }
        if self.warmup_epochs > self.epochs {
            return Err(Error::invalid("warmup longer than training"));
        }
        Ok(())
    }

    /// Learning rate of a 0-based epoch: linear warmup to `base_lr`, then one
    /// decay per milestone reached.
    pub fn lr_at(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.epochs {
            return Err(Error::invalid(format!("epoch {epoch} out of range for {} epochs", self.epochs)));
        }
        if epoch < self.warmup_epochs {
            return Ok(self.base_lr * (epoch + 1) as f64 / self.warmup_epochs as f64);
        }
        let passed = self.decay_milestones.iter().filter(|&&m| m <= epoch).count() as i32;
        // dividing by the inverse factor keeps 0.1 → 0.01 → 0.001 exact
        Ok(self.base_lr / (1.0 / self.decay_factor).powi(passed))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "base_lr" => self.base_lr = parse_value(key, value)?,
            "warmup_epochs" => self.warmup_epochs = parse_value(key, value)?,
            "decay_milestones" => self.decay_milestones = parse_list(key, value)?,
            "decay_factor" => self.decay_factor = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "momentum" => self.momentum = parse_value(key, value)?,
            "grad_clip" => self.grad_clip = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let milestones: Vec<String> = self.decay_milestones.iter().map(|m| m.to_string()).collect();
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("base_lr", self.base_lr.to_string()),
            ("warmup_epochs", self.warmup_epochs.to_string()),
            ("decay_milestones", milestones.join(",")),
            ("decay_factor", self.decay_factor.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("momentum", self.momentum.to_string()),
            ("grad_clip", self.grad_clip.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}
