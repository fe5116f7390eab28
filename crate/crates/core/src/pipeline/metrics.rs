use std::path::Path;

use rayon::prelude::*;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::FreqMixFormer;

/// Classification quality of a set of predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub top1: f64,
    /// `NaN` for classes without samples.
    pub per_class: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Mean cross-entropy of the raw scores (`NaN` when not computed).
    pub loss: f64,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn cross_entropy(row: &[f64], label: usize) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - row[label]
}

impl Metrics {
    /// Argmax classification of score rows against labels.
    pub fn from_scores(rows: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("no samples to score"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!("{} score rows for {} labels", rows.len(), labels.len())));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        let mut loss = 0.0;
        for (row, &label) in rows.iter().zip(labels) {
            if row.len() != num_classes || label >= num_classes {
                return Err(Error::invalid(format!(
                    "score row of length {} / label {label} for {num_classes} classes",
                    row.len()
                )));
            }
            confusion[label][argmax(row)] += 1;
            loss += cross_entropy(row, label);
        }
        let trace: usize = (0..num_classes).map(|k| confusion[k][k]).sum();
        let per_class = confusion
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let n: usize = r.iter().sum();
                if n == 0 {
                    f64::NAN
                } else {
                    r[k] as f64 / n as f64
                }
            })
            .collect();
        Ok(Self {
            top1: trace as f64 / rows.len() as f64,
            per_class,
            confusion,
            loss: loss / rows.len() as f64,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

/// Per-sample class scores with sample ids; CSV header `id,c0,…,c{k−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreFile {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ScoreFile {
    pub fn num_classes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let k = self.num_classes();
        let mut out = String::from("id");
        for c in 0..k {
            out.push_str(&format!(",c{c}"));
        }
        out.push('\n');
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(id);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty score file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        let k = cols.len().saturating_sub(1);
        if cols[0] != "id" || k == 0 || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("c{i}")) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("bad score header {header:?}"),
            });
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != k + 1 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {} fields, got {}", k + 1, fields.len()),
                });
            }
            let row = fields[1..]
                .iter()
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        msg: format!("bad score {v:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ids.push(fields[0].to_string());
            rows.push(row);
        }
        Ok(Self { ids, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Runs the model over one split; sample ids are dataset indices.
pub fn evaluate(model: &FreqMixFormer, ds: &Dataset, split: Split) -> Result<(Metrics, ScoreFile)> {
    let items: Vec<(usize, usize)> = ds.split(split).map(|(i, s)| (i, s.label)).collect();
    if items.is_empty() {
        return Err(Error::invalid(format!("the {split} split is empty")));
    }
    let rows = items
        .par_iter()
        .map(|&(i, _)| Ok(model.forward_sample(&ds.samples[i].data)?.into_data()))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = items.iter().map(|&(_, l)| l).collect();
    let metrics = Metrics::from_scores(&rows, &labels, ds.num_classes)?;
    let ids = items.iter().map(|(i, _)| i.to_string()).collect();
    Ok((metrics, ScoreFile { ids, rows }))
}

/// `Σ_s w_s·softmax(scores_s)` per sample, then argmax against `labels`.
pub fn ensemble(files: &[ScoreFile], weights: &[f64], labels: &[usize]) -> Result<Metrics> {
    let first = files.first().ok_or_else(|| Error::invalid("no score files to fuse"))?;
    if weights.len() != files.len() {
        return Err(Error::invalid(format!("{} weights for {} score files", weights.len(), files.len())));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("ensemble weights must be finite"));
    }
    let k = first.num_classes();
    for f in &files[1..] {
        if f.ids != first.ids || f.num_classes() != k {
            return Err(Error::invalid("score files are not aligned (ids or class counts differ)"));
        }
    }
    let fused: Vec<Vec<f64>> = (0..first.rows.len())
        .map(|i| {
            let mut acc = vec![0.0; k];
            for (f, &w) in files.iter().zip(weights) {
                for (a, p) in acc.iter_mut().zip(softmax(&f.rows[i])) {
                    *a += w * p;
                }
            }
            acc
        })
        .collect();
    Metrics::from_scores(&fused, labels, k)
}

/// Class ids bucketed by per-class accuracy.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DifficultyReport {
    /// Accuracy below 0.80.
    pub hard: Vec<usize>,
    /// Accuracy in `[0.80, 0.90]`.
    pub medium: Vec<usize>,
    /// Accuracy above 0.90.
    pub easy: Vec<usize>,
}

pub fn difficulty_report(per_class: &[f64]) -> DifficultyReport {
    let mut r = DifficultyReport::default();
    for (k, &acc) in per_class.iter().enumerate() {
        if acc > 0.90 {
            r.easy.push(k);
        } else if acc >= 0.80 {
            r.medium.push(k);
        } else {
            r.hard.push(k);
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn one_hot(k: usize, n: usize) -> Vec<f64> {
        (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn perfect_scores() {
        let labels = [0, 2, 1, 2, 0];
        let rows: Vec<_> = labels.iter().map(|&l| one_hot(l, 3)).collect();
        let m = Metrics::from_scores(&rows, &labels, 3).unwrap();
        assert_eq!(m.top1, 1.0);
        assert_eq!(m.per_class, vec![1.0, 1.0, 1.0]);
        assert_eq!(m.confusion[2][2], 2);
    }

    #[test]
    fn random_scores_are_near_chance() {
        let mut rng = Rng::new(4);
        let (n, k) = (3000, 4);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.uniform(0.0, 1.0)).collect()).collect();
        let m = Metrics::from_scores(&rows, &labels, k).unwrap();
        let p = 1.0 / k as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((m.top1 - p).abs() < 3.0 * sigma, "{}", m.top1);
        let trace: usize = (0..k).map(|c| m.confusion[c][c]).sum();
        assert_eq!(m.top1, trace as f64 / m.total() as f64);
        assert!(m.per_class.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn metrics_errors() {
        assert!(Metrics::from_scores(&[], &[], 2).is_err());
        assert!(Metrics::from_scores(&[vec![1.0, 0.0]], &[2], 2).is_err());
        assert!(Metrics::from_scores(&[vec![1.0]], &[0], 2).is_err());
    }

    fn scores(rows: Vec<Vec<f64>>) -> ScoreFile {
        ScoreFile {
            ids: (0..rows.len()).map(|i| i.to_string()).collect(),
            rows,
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = Rng::new(5);
        let f = scores((0..4).map(|_| (0..3).map(|_| rng.normal()).collect()).collect());
        let text = f.to_csv();
        assert!(text.starts_with("id,c0,c1,c2\n"));
        assert_eq!(ScoreFile::from_csv(&text).unwrap(), f);
        assert!(ScoreFile::from_csv("id,c1\n0,1\n").is_err());
        assert!(ScoreFile::from_csv("id,c0\n0,1,2\n").is_err());
    }

    #[test]
    fn self_fusion_and_zero_weight() {
        let mut rng = Rng::new(6);
        let labels: Vec<usize> = (0..50).map(|_| rng.below(3)).collect();
        let a = scores((0..50).map(|_| (0..3).map(|_| rng.normal()).collect()).collect());
        let b = scores((0..50).map(|_| (0..3).map(|_| rng.normal()).collect()).collect());
        let alone = Metrics::from_scores(&a.rows, &labels, 3).unwrap();
        let twice = ensemble(&[a.clone(), a.clone()], &[1.0, 1.0], &labels).unwrap();
        assert_eq!(twice.top1, alone.top1);
        assert_eq!(twice.confusion, alone.confusion);
        let zero = ensemble(&[a.clone(), b.clone()], &[1.0, 0.0], &labels).unwrap();
        assert_eq!(zero.confusion, alone.confusion);
        let scaled = ensemble(&[a.clone(), b.clone()], &[3.0, 1.5], &labels).unwrap();
        let unit = ensemble(&[a.clone(), b], &[2.0, 1.0], &labels).unwrap();
        assert_eq!(scaled.confusion, unit.confusion);
    }

    #[test]
    fn complementary_streams_fuse_to_perfect() {
        let n = 20;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let confident = |l: usize| if l == 0 { vec![8.0, -8.0] } else { vec![-8.0, 8.0] };
        let vague = |l: usize| if l == 0 { vec![-0.01, 0.01] } else { vec![0.01, -0.01] };
        let a = scores((0..n).map(|i| if i < n / 2 { confident(labels[i]) } else { vague(labels[i]) }).collect());
        let b = scores((0..n).map(|i| if i >= n / 2 { confident(labels[i]) } else { vague(labels[i]) }).collect());
        assert_eq!(Metrics::from_scores(&a.rows, &labels, 2).unwrap().top1, 0.5);
        assert_eq!(ensemble(&[a, b], &[1.0, 1.0], &labels).unwrap().top1, 1.0);
    }

    #[test]
    fn misaligned_files_rejected() {
        let a = scores(vec![vec![1.0, 0.0]]);
        let mut b = a.clone();
        b.ids[0] = "7".into();
        assert!(ensemble(&[a.clone(), b], &[1.0, 1.0], &[0]).is_err());
        assert!(ensemble(&[a.clone()], &[1.0, 1.0], &[0]).is_err());
        assert!(ensemble(&[a, scores(vec![vec![1.0, 0.0, 0.0]])], &[1.0, 1.0], &[0]).is_err());
    }

    #[test]
    fn difficulty_thresholds() {
        let r = difficulty_report(&[0.714, 0.952, 0.80, 0.90, 0.9000001, 0.7999]);
        assert_eq!(r.hard, vec![0, 5]);
        assert_eq!(r.medium, vec![2, 3]);
        assert_eq!(r.easy, vec![1, 4]);
    }
}
