use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::FreqMixFormer;
use crate::numerics::{clip_grad_norm, save_checkpoint, sgd_step, Rng};

use super::metrics::{argmax, evaluate};
use super::TrainingSchedule;

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub train_acc: f64,
    /// Test-split accuracy, `NaN` without a test split.
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

impl TrainReport {
    /// CSV with header `epoch,lr,loss,train_acc,val_acc`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,lr,loss,train_acc,val_acc\n");
        for r in &self.log {
            writeln!(out, "{},{},{},{},{}", r.epoch, r.lr, r.loss, r.train_acc, r.val_acc).unwrap();
        }
        out
    }

    pub fn final_val_acc(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.val_acc)
    }
}

/// Where checkpoints and the log go; `None` keeps everything in memory.
#[derive(Clone, Debug, Default)]
pub struct TrainOutput {
    pub dir: Option<PathBuf>,
    /// Also write one checkpoint per epoch (best and last are always written).
    pub every_epoch: bool,
}

fn ckpt(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.ckpt"))
}

/// Mini-batch SGD with cross-entropy over seeded shuffles of the train split.
///
/// Per-sample gradients are computed in parallel and summed in sample order,
/// so results do not depend on the thread count.
pub fn train(
    model: &mut FreqMixFormer,
    ds: &Dataset,
    schedule: &TrainingSchedule,
    out: &TrainOutput,
) -> Result<TrainReport> {
    schedule.validate()?;
    let cfg = model.config();
    if ds.sample_shape() != [cfg.joints, cfg.in_channels, cfg.frames] || ds.num_classes != cfg.num_classes {
        return Err(Error::invalid(format!(
            "dataset {:?} with {} classes does not fit the model",
            ds.sample_shape(),
            ds.num_classes
        )));
    }
    let mut order: Vec<usize> = ds.split(Split::Train).map(|(i, _)| i).collect();
    if order.is_empty() {
        return Err(Error::invalid("the train split is empty"));
    }
    let has_test = ds.count(Split::Test) > 0;
    if let Some(dir) = &out.dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut rng = Rng::with_stream(schedule.seed, 1);
    let mut report = TrainReport {
        log: Vec::with_capacity(schedule.epochs),
        best_epoch: 0,
        best_val_acc: f64::NEG_INFINITY,
    };
    for epoch in 0..schedule.epochs {
        let lr = schedule.lr_at(epoch)?;
        rng.shuffle(&mut order);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch, idx) in order.chunks(schedule.batch_size).enumerate() {
            let results: Vec<_> = idx
                .par_iter()
                .map(|&i| {
                    let s = &ds.samples[i];
                    model.loss_and_gradients(&s.data, s.label)
                })
                .collect();
            let scale = 1.0 / idx.len() as f64;
            model.store_mut().zero_grad();
            for (&i, r) in idx.iter().zip(results) {
                let (loss, logits, grads) = r.map_err(|e| match e {
                    Error::NonFinite(what) => {
                        warn!("non-finite value in {what}");
                        Error::Diverged {
                            epoch,
                            batch,
                            loss: f64::NAN,
                        }
                    }
                    other => other,
                })?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, batch, loss });
                }
                loss_sum += loss;
                correct += usize::from(argmax(logits.data()) == ds.samples[i].label);
                grads.accumulate_into(model.store_mut(), scale);
            }
            clip_grad_norm(model.store_mut(), schedule.grad_clip);
            sgd_step(model.store_mut(), lr, schedule.momentum, schedule.weight_decay)?;
        }
        let val_acc = if has_test {
            evaluate(model, ds, Split::Test)?.0.top1
        } else {
            f64::NAN
        };
        let row = EpochLog {
            epoch,
            lr,
            loss: loss_sum / order.len() as f64,
            train_acc: correct as f64 / order.len() as f64,
            val_acc,
        };
        info!(
            "epoch {epoch}: lr {lr} loss {:.5} train {:.4} val {:.4}",
            row.loss, row.train_acc, row.val_acc
        );
        let improved = !has_test || val_acc > report.best_val_acc;
        if improved {
            report.best_epoch = epoch;
            report.best_val_acc = val_acc;
        }
        report.log.push(row);
        if let Some(dir) = &out.dir {
            if out.every_epoch {
                save_checkpoint(model.store(), &ckpt(dir, &format!("epoch_{epoch:03}")))?;
            }
            if improved {
                save_checkpoint(model.store(), &ckpt(dir, "best"))?;
            }
            save_checkpoint(model.store(), &ckpt(dir, "last"))?;
            let log = dir.join("train_log.csv");
            std::fs::write(&log, report.log_csv()).map_err(|e| Error::io(&log, e))?;
        }
    }
    Ok(report)
}
