use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{Arch, DetectorConfig};
use super::model::DetectorModel;
use super::nets::Net;
use super::optim::{clip_global_norm, Adam};
use crate::corpus::LabeledWindow;
use crate::error::{Error, Result};
use crate::features::Scaler;
use crate::rng::{domain, stream};
use crate::tracegen::ClassLabel;

/// Global gradient-norm ceiling applied to every mini-batch.
pub const CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean mini-batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Held-out loss after each epoch (empty without a held-out fold).
    pub val_loss: Vec<f64>,
    /// Epoch whose weights were kept (1-based).
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub n_fit: usize,
    pub n_val: usize,
}

/// Distinct run ids per class, sorted.
pub(crate) fn runs_by_class(windows: &[&LabeledWindow]) -> [Vec<String>; 3] {
    let mut sets: [BTreeSet<&str>; 3] = Default::default();
    for w in windows {
        sets[w.label.index()].insert(w.run_id.as_str());
    }
    sets.map(|s| s.into_iter().map(str::to_owned).collect())
}

/// Assign every run to one of `k` folds, stratified by class.
pub(crate) fn fold_assignment(runs: &[Vec<String>; 3], k: usize, seed: u64, tag: u64) -> BTreeMap<(usize, String), usize> {
    let mut out = BTreeMap::new();
    for (c, ids) in runs.iter().enumerate() {
        let mut ids = ids.clone();
        ids.shuffle(&mut stream(seed, &[domain::FOLDS, tag, c as u64]));
        for (i, id) in ids.into_iter().enumerate() {
            out.insert((c, id), i % k);
        }
    }
    out
}

pub(crate) fn check_classes(windows: &[&LabeledWindow]) -> Result<()> {
    let mut seen = [false; 3];
    for w in windows {
        seen[w.label.index()] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Training(format!("training data has no {} windows", ClassLabel::ALL[k])));
    }
    Ok(())
}

/// Train a detector. One fold of runs (1/`folds` per class) is held out for
/// early stopping; the weights with the lowest held-out loss are kept.
pub fn train(config: &DetectorConfig, windows: &[&LabeledWindow]) -> Result<(DetectorModel, TrainReport)> {
    config.validate()?;
    check_classes(windows)?;
    let len = windows[0].samples.len();
    if let Some(w) = windows.iter().find(|w| w.samples.len() != len) {
        return Err(Error::Shape(format!("window of length {} among windows of length {len}", w.samples.len())));
    }
    if config.arch != Arch::Tcn && len % config.frame != 0 {
        return Err(Error::Shape(format!("window length {len} is not a multiple of frame {}", config.frame)));
    }
    let scaler = Scaler::fit(windows.iter().map(|w| w.samples.as_slice()))?;

    let runs = runs_by_class(windows);
    let folds = fold_assignment(&runs, config.folds, config.seed, 0);
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for w in windows {
        let x = scaler.apply(&w.samples)?;
        let held = runs[w.label.index()].len() >= config.folds && folds[&(w.label.index(), w.run_id.clone())] == 0;
        if held {
            val.push((x, w.label.index()));
        } else {
            fit.push((x, w.label.index()));
        }
    }

    let mut net = Net::new(config, &mut stream(config.seed, &[domain::TRAIN, 0]));
    let mut opt = Adam::new(config.lr, &net.zero_grads());
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut shuffle_rng = stream(config.seed, &[domain::TRAIN, 1]);
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        epochs_run: 0,
        n_fit: fit.len(),
        n_val: val.len(),
    };
    let mut best = (f64::INFINITY, net.clone());
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch) {
            let mut grads = net.zero_grads();
            let mut batch_loss = 0.0;
            for &i in batch {
                let (x, y) = &fit[i];
                batch_loss += net.loss(x, *y, Some(&mut grads));
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.data.iter_mut().for_each(|v| *v *= scale));
            clip_global_norm(&mut grads, CLIP_NORM);
            opt.step(&mut net.params_mut(), &grads);
            epoch_loss += batch_loss;
        }
        epoch_loss /= fit.len() as f64;
        report.train_loss.push(epoch_loss);
        report.epochs_run = epoch;
        let monitored = if val.is_empty() {
            epoch_loss
        } else {
            let v = val.iter().map(|(x, y)| net.loss(x, *y, None)).sum::<f64>() / val.len() as f64;
            report.val_loss.push(v);
            v
        };
        if !monitored.is_finite() {
            return Err(Error::Training(format!("loss diverged at epoch {epoch}")));
        }
        if monitored < best.0 {
            best = (monitored, net.clone());
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let model = DetectorModel { config: config.clone(), scaler, net: best.1, final_epoch: report.best_epoch };
    Ok((model, report))
}
