use serde::{Deserialize, Serialize};

use super::config::DetectorConfig;
use super::model::DetectorModel;
use super::train::{fold_assignment, runs_by_class, train};
use crate::corpus::LabeledWindow;
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
pub type Confusion = [[usize; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl Metrics {
    /// Macro-averaged metrics; an undefined per-class ratio counts as 0.
    pub fn from_confusion(confusion: Confusion) -> Result<Metrics> {
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::param("empty confusion matrix"));
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
        for k in 0..3 {
            let tp = confusion[k][k];
            let pk = ratio(tp, (0..3).map(|i| confusion[i][k]).sum());
            let rk = ratio(tp, confusion[k].iter().sum());
            p += pk;
            r += rk;
            f += if pk + rk > 0.0 { 2.0 * pk * rk / (pk + rk) } else { 0.0 };
        }
        let diag: usize = (0..3).map(|k| confusion[k][k]).sum();
        Ok(Metrics { accuracy: diag as f64 / total as f64, precision: p / 3.0, recall: r / 3.0, f1: f / 3.0, confusion })
    }
}

pub fn confusion(model: &DetectorModel, windows: &[&LabeledWindow]) -> Result<Confusion> {
    let mut c = [[0usize; 3]; 3];
    for w in windows {
        let pred = model.classify(&w.samples)?;
        c[w.label.index()][pred.index()] += 1;
    }
    Ok(c)
}

pub fn evaluate(model: &DetectorModel, windows: &[&LabeledWindow]) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::param("cannot evaluate on an empty window set"));
    }
    Metrics::from_confusion(confusion(model, windows)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean: MetricSummary,
    /// Population standard deviation across folds.
    pub std: MetricSummary,
}

fn summarize(folds: &[Metrics]) -> (MetricSummary, MetricSummary) {
    let n = folds.len() as f64;
    let stat = |get: fn(&Metrics) -> f64| {
        let m = folds.iter().map(get).sum::<f64>() / n;
        let v = folds.iter().map(|f| (get(f) - m).powi(2)).sum::<f64>() / n;
        (m, v.sqrt())
    };
    let a = stat(|m| m.accuracy);
    let p = stat(|m| m.precision);
    let r = stat(|m| m.recall);
    let f = stat(|m| m.f1);
    (
        MetricSummary { accuracy: a.0, precision: p.0, recall: r.0, f1: f.0 },
        MetricSummary { accuracy: a.1, precision: p.1, recall: r.1, f1: f.1 },
    )
}

/// Run-level stratified k-fold cross-validation with `config.folds` folds.
pub fn cross_validate(config: &DetectorConfig, windows: &[&LabeledWindow]) -> Result<CvReport> {
    config.validate()?;
    let runs = runs_by_class(windows);
    let fewest = runs.iter().map(Vec::len).min().unwrap_or(0);
    if config.folds > fewest {
        return Err(Error::param(format!(
            "{} folds requested but the smallest class has {fewest} runs",
            config.folds
        )));
    }
    let assign = fold_assignment(&runs, config.folds, config.seed, 1);
    let fold_of = |w: &LabeledWindow| assign[&(w.label.index(), w.run_id.clone())];
    let mut folds = Vec::with_capacity(config.folds);
    for k in 0..config.folds {
        let (test, rest): (Vec<&LabeledWindow>, Vec<&LabeledWindow>) = windows.iter().copied().partition(|w| fold_of(w) == k);
        let (model, _) = train(config, &rest)?;
        folds.push(evaluate(&model, &test)?);
    }
    let (mean, std) = summarize(&folds);
    Ok(CvReport { folds, mean, std })
}
