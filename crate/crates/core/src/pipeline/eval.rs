//! Repeated random-split evaluation and parameter sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Config, FilterChoice};
use super::model::{classify, train};
use crate::data::{split_labels, SplitSpec};
use crate::error::{Error, Result};
use crate::features::LabeledSample;

/// Wall-clock seconds per stage, summed over repetitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub train_s: f64,
    pub classify_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub per_rep_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// `confusion[true][predicted]`, pooled over repetitions.
    pub confusion: Vec<Vec<usize>>,
    pub sweep_grid: Option<Vec<SweepPoint>>,
    pub best: Option<SweepPoint>,
    pub timing: Timing,
    /// Training and probe features whose normalization was skipped.
    pub degenerate_count: usize,
}

impl RunReport {
    /// Everything except timing, which legitimately differs between runs.
    pub fn same_results(&self, other: &RunReport) -> bool {
        self.per_rep_accuracy == other.per_rep_accuracy
            && self.mean_accuracy == other.mean_accuracy
            && self.std_accuracy == other.std_accuracy
            && self.confusion == other.confusion
            && self.sweep_grid == other.sweep_grid
            && self.best == other.best
            && self.degenerate_count == other.degenerate_count
    }

    /// `rep,accuracy` rows followed by a summary block.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rep,accuracy\n");
        for (i, a) in self.per_rep_accuracy.iter().enumerate() {
            let _ = writeln!(s, "{i},{a}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "summary,value");
        let _ = writeln!(s, "mean_accuracy,{}", self.mean_accuracy);
        let _ = writeln!(s, "std_accuracy,{}", self.std_accuracy);
        let _ = writeln!(s, "repetitions,{}", self.per_rep_accuracy.len());
        let _ = writeln!(s, "feature_dim,{}", self.confusion.len());
        let _ = writeln!(s, "degenerate_count,{}", self.degenerate_count);
        if let Some(best) = self.best {
            let _ = writeln!(s, "best_value,{}", best.value);
        }
        let _ = writeln!(s, "train_seconds,{:.3}", self.timing.train_s);
        let _ = writeln!(s, "classify_seconds,{:.3}", self.timing.classify_s);
        let _ = writeln!(s, "total_seconds,{:.3}", self.timing.total_s);
        s
    }

    /// `param_value,mean_accuracy,std_accuracy`, one row per grid value.
    pub fn sweep_csv(&self) -> Option<String> {
        let grid = self.sweep_grid.as_ref()?;
        let mut s = String::from("param_value,mean_accuracy,std_accuracy\n");
        for pt in grid {
            let _ = writeln!(s, "{},{},{}", pt.value, pt.mean_accuracy, pt.std_accuracy);
        }
        Some(s)
    }
}

struct RepOutcome {
    accuracy: f64,
    confusion: Vec<Vec<usize>>,
    degenerate: usize,
    train_s: f64,
    classify_s: f64,
}

fn run_rep(samples: &[LabeledSample], labels: &[usize], spec: &SplitSpec, config: &Config, rep: usize, classes: usize) -> Result<RepOutcome> {
    let split = split_labels(labels, spec, rep)?;
    let train_set: Vec<LabeledSample> = split.train.iter().map(|&i| samples[i].clone()).collect();
    let t0 = Instant::now();
    let model = train(&train_set, config)?;
    let train_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut confusion = vec![vec![0; classes]; classes];
    let mut correct = 0;
    let mut degenerate = model.degenerate_count;
    for &i in &split.test {
        let c = classify(&model, &samples[i].vector)?;
        confusion[samples[i].label][c.predicted] += 1;
        correct += (c.predicted == samples[i].label) as usize;
        degenerate += c.degenerate as usize;
    }
    Ok(RepOutcome {
        accuracy: correct as f64 / split.test.len() as f64,
        confusion,
        degenerate,
        train_s,
        classify_s: t1.elapsed().as_secs_f64(),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run every repetition of `spec`: split, train, classify the held-out
/// samples. Repetitions run in parallel and are merged in index order.
pub fn evaluate(samples: &[LabeledSample], spec: &SplitSpec, config: &Config) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let outcomes = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| run_rep(samples, &labels, spec, config, rep, classes))
        .collect::<Result<Vec<_>>>()?;

    let per_rep_accuracy: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&per_rep_accuracy);
    let mut confusion = vec![vec![0; classes]; classes];
    let mut timing = Timing::default();
    let mut degenerate_count = 0;
    for o in &outcomes {
        for (row, orow) in confusion.iter_mut().zip(&o.confusion) {
            for (c, v) in row.iter_mut().zip(orow) {
                *c += v;
            }
        }
        timing.train_s += o.train_s;
        timing.classify_s += o.classify_s;
        degenerate_count += o.degenerate;
    }
    timing.total_s = start.elapsed().as_secs_f64();
    log::info!(
        "{}: mean accuracy {:.4} over {} repetitions",
        config.filter.name(),
        mean_accuracy,
        spec.repetitions
    );
    Ok(RunReport {
        per_rep_accuracy,
        mean_accuracy,
        std_accuracy,
        confusion,
        sweep_grid: None,
        best: None,
        timing,
        degenerate_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    OmegaS,
    RbfDelta,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega-s" | "omega_s" => Ok(SweepParam::OmegaS),
            "delta" | "rbf-delta" | "rbf_delta" => Ok(SweepParam::RbfDelta),
            other => Err(Error::invalid(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

fn config_at(base: &Config, param: SweepParam, value: f64) -> Result<Config> {
    let mut config = base.clone();
    match param {
        SweepParam::OmegaS => {
            config.omega_s = Some(value);
            config.omega_n = None;
        }
        SweepParam::RbfDelta => {
            if config.filter != FilterChoice::Kuootf || config.kernel != "rbf" {
                return Err(Error::invalid("a delta sweep needs filter=kuootf and kernel=rbf"));
            }
            config.delta = value;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Evaluate each grid value on the same splits. The returned report carries
/// the per-repetition detail of the best value (first on ties).
pub fn sweep(samples: &[LabeledSample], spec: &SplitSpec, base: &Config, param: SweepParam, grid: &[f64]) -> Result<RunReport> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    let configs = grid.iter().map(|&v| config_at(base, param, v)).collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let reports = configs
        .par_iter()
        .map(|c| evaluate(samples, spec, c))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<SweepPoint> = grid
        .iter()
        .zip(&reports)
        .map(|(&value, r)| SweepPoint {
            value,
            mean_accuracy: r.mean_accuracy,
            std_accuracy: r.std_accuracy,
        })
        .collect();
    let mut best = 0;
    for (i, pt) in points.iter().enumerate() {
        if pt.mean_accuracy > points[best].mean_accuracy {
            best = i;
        }
    }
    let mut report = reports.into_iter().nth(best).expect("grid is nonempty");
    report.best = Some(points[best]);
    report.sweep_grid = Some(points);
    report.timing.total_s = start.elapsed().as_secs_f64();
    Ok(report)
}
