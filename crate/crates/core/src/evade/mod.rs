//! Attack success rate of perturbed Mirai windows and two defenses:
//! adversarial training and band-targeted noise injection.

mod noise;

pub use noise::{defend_predict, fit_noise_defense, magnitude_spectrum, NoiseBandDefense, N_BINS};

use serde::{Deserialize, Serialize};

use crate::corpus::{perturbed_windows, CorpusConfig, LabeledWindow};
use crate::detect::{train, Arch, ClassProbs, DetectorConfig, DetectorModel, TrainReport};
use crate::error::{Error, Result};
use crate::rng::domain;
use crate::tracegen::{ClassLabel, PerturbationSpec, VariantKind};

pub const DEFAULT_TOP_FRACTION: f64 = 0.10;
pub const DEFAULT_SIGMA_SCALE: f64 = 0.1;
/// Perturbed runs generated per variant for ASR evaluation.
pub const DEFAULT_ATTACK_RUNS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrEntry {
    pub arch: Arch,
    pub variant: VariantKind,
    pub asr: f64,
    pub n_windows: usize,
    pub to_idle: usize,
    pub to_iot: usize,
}

impl AsrEntry {
    pub fn evaded(&self) -> usize {
        self.to_idle + self.to_iot
    }
}

/// Fraction of Mirai windows that the model classifies as Idle or IoT service.
pub fn compute_asr(model: &DetectorModel, windows: &[&LabeledWindow]) -> Result<AsrEntry> {
    compute_asr_with(model.arch(), windows, |w| model.predict(w))
}

/// [`compute_asr`] with an arbitrary classifier, e.g. a noise-defended one.
pub fn compute_asr_with<F>(arch: Arch, windows: &[&LabeledWindow], mut classify: F) -> Result<AsrEntry>
where
    F: FnMut(&[f64]) -> Result<ClassProbs>,
{
    if windows.is_empty() {
        return Err(Error::param("ASR needs at least one window"));
    }
    if let Some(w) = windows.iter().find(|w| w.label != ClassLabel::Mirai) {
        return Err(Error::param(format!("ASR window {} is labeled {}, not mirai", w.run_id, w.label)));
    }
    let variant = windows[0].variant;
    if let Some(w) = windows.iter().find(|w| w.variant != variant) {
        return Err(Error::param(format!("ASR windows mix variants {variant} and {}", w.variant)));
    }
    let (mut to_idle, mut to_iot) = (0, 0);
    for w in windows {
        match classify(&w.samples)?.argmax() {
            ClassLabel::Idle => to_idle += 1,
            ClassLabel::IoTService => to_iot += 1,
            ClassLabel::Mirai => {}
        }
    }
    let n = windows.len();
    Ok(AsrEntry { arch, variant, asr: (to_idle + to_iot) as f64 / n as f64, n_windows: n, to_idle, to_iot })
}

/// Perturbed Mirai windows used to augment training: as many as there are
/// clean Mirai windows, split evenly across the requested variants (earlier
/// variants take the remainder). `None` contributes nothing.
pub fn augmentation_windows(
    clean_train: &[&LabeledWindow],
    corpus_config: &CorpusConfig,
    variants: &[VariantKind],
    seed: u64,
) -> Result<Vec<LabeledWindow>> {
    if variants.is_empty() {
        return Err(Error::param("adversarial training needs at least one variant"));
    }
    let mut kinds: Vec<VariantKind> = variants.iter().copied().filter(|&v| v != VariantKind::None).collect();
    kinds.sort_by_key(|v| v.index());
    kinds.dedup();
    if kinds.is_empty() {
        return Ok(Vec::new());
    }
    let n_mirai = clean_train.iter().filter(|w| w.label == ClassLabel::Mirai).count();
    let mut out = Vec::with_capacity(n_mirai);
    for (i, &kind) in kinds.iter().enumerate() {
        let n = n_mirai / kinds.len() + usize::from(i < n_mirai % kinds.len());
        let spec = PerturbationSpec::default_for(kind);
        out.extend(perturbed_windows(corpus_config, &spec, n, seed, domain::ADV_AUGMENT)?);
    }
    Ok(out)
}

/// Retrain on the clean training windows plus perturbed Mirai windows in a
/// 1:1 ratio with the clean Mirai windows.
pub fn adversarial_train(
    config: &DetectorConfig,
    clean_train: &[&LabeledWindow],
    corpus_config: &CorpusConfig,
    variants: &[VariantKind],
) -> Result<(DetectorModel, TrainReport)> {
    let extra = augmentation_windows(clean_train, corpus_config, variants, config.seed)?;
    let mut all: Vec<&LabeledWindow> = clean_train.to_vec();
    all.extend(extra.iter());
    train(config, &all)
}
