//! Experiment configuration: one JSON document holding every parameter of a
//! run, plus the digest embedded in every emitted table.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusConfig;
use crate::detect::{Arch, DetectorConfig};
use crate::error::{Error, Result};
use crate::evade::{DEFAULT_ATTACK_RUNS, DEFAULT_SIGMA_SCALE, DEFAULT_TOP_FRACTION};
use crate::explain::{DEFAULT_GROUP_SIZE, DEFAULT_PERMUTATIONS};
use crate::stats::BatteryConfig;
use crate::tracegen::{PerturbationSpec, VariantKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    /// Perturbed Mirai runs per variant for ASR.
    pub attack_runs: usize,
    pub battery: BatteryConfig,
    pub noise_top_fraction: f64,
    pub noise_sigma_scale: f64,
    /// Perturbed windows per variant used to fit the noise defense.
    pub noise_fit_runs: usize,
    pub shapley_permutations: usize,
    pub shapley_group_size: usize,
    /// Fresh Mirai windows explained per model.
    pub explain_windows: usize,
    pub overlay_top_q: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            attack_runs: DEFAULT_ATTACK_RUNS,
            battery: BatteryConfig::default(),
            noise_top_fraction: DEFAULT_TOP_FRACTION,
            noise_sigma_scale: DEFAULT_SIGMA_SCALE,
            noise_fit_runs: 200,
            shapley_permutations: DEFAULT_PERMUTATIONS,
            shapley_group_size: DEFAULT_GROUP_SIZE,
            explain_windows: 30,
            overlay_top_q: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    /// One spec per injected variant.
    pub variants: Vec<PerturbationSpec>,
    /// Detector settings per architecture; their `seed` fields are replaced
    /// by the master seed.
    pub detectors: Vec<DetectorConfig>,
    pub eval: EvalParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            corpus: CorpusConfig::desk(),
            variants: VariantKind::INJECTED.iter().map(|&k| PerturbationSpec::default_for(k)).collect(),
            detectors: Arch::ALL.iter().map(|&a| DetectorConfig::new(a, 42)).collect(),
            eval: EvalParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        if self.variants.is_empty() || self.detectors.is_empty() {
            return Err(Error::Config("at least one variant and one detector are required".into()));
        }
        for v in &self.variants {
            if v.kind == VariantKind::None {
                return Err(Error::Config("variant list must not contain 'none'".into()));
            }
            v.validate().map_err(|e| Error::Config(format!("variant {}: {e}", v.kind)))?;
        }
        if has_duplicates(self.variants.iter().map(|v| v.kind.index())) {
            return Err(Error::Config("each variant may appear once".into()));
        }
        for d in &self.detectors {
            d.validate().map_err(|e| Error::Config(format!("detector {}: {e}", d.arch)))?;
        }
        if has_duplicates(self.detectors.iter().map(|d| d.arch as usize)) {
            return Err(Error::Config("each architecture may appear once".into()));
        }
        let e = &self.eval;
        e.battery.validate()?;
        if e.attack_runs == 0 || e.noise_fit_runs == 0 || e.explain_windows == 0 || e.shapley_permutations == 0 {
            return Err(Error::Config("run and permutation counts must be positive".into()));
        }
        if !(e.noise_top_fraction > 0.0 && e.noise_top_fraction <= 1.0) || !(e.overlay_top_q > 0.0 && e.overlay_top_q <= 1.0) {
            return Err(Error::Config("noise_top_fraction and overlay_top_q must lie in (0, 1]".into()));
        }
        if !(e.noise_sigma_scale >= 0.0 && e.noise_sigma_scale.is_finite()) {
            return Err(Error::Config("noise_sigma_scale must be finite and >= 0".into()));
        }
        if e.shapley_group_size == 0 || crate::corpus::WINDOW_LEN % e.shapley_group_size != 0 {
            return Err(Error::Config("shapley_group_size must divide 150".into()));
        }
        Ok(())
    }

    /// Detector settings for `arch`, seeded with the master seed.
    pub fn detector(&self, arch: Arch) -> Result<DetectorConfig> {
        self.detectors
            .iter()
            .find(|d| d.arch == arch)
            .map(|d| DetectorConfig { seed: self.seed, ..d.clone() })
            .ok_or_else(|| Error::Config(format!("no detector configured for arch {arch}")))
    }

    pub fn variant(&self, kind: VariantKind) -> Result<&PerturbationSpec> {
        self.variants
            .iter()
            .find(|v| v.kind == kind)
            .ok_or_else(|| Error::Config(format!("no spec configured for variant {kind}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::format(path, e.line(), format!("invalid experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the compact JSON encoding (which includes the seed).
    pub fn digest(&self) -> String {
        digest_of(&serde_json::to_string(self).expect("config serializes"))
    }
}

fn has_duplicates(keys: impl Iterator<Item = usize>) -> bool {
    let mut v: Vec<usize> = keys.collect();
    let n = v.len();
    v.sort_unstable();
    v.dedup();
    v.len() != n
}

pub fn digest_of(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
