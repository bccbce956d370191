use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Lstm,
    #[serde(rename = "bilstm")]
    BiLstm,
    Tcn,
    AeMlp,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Lstm, Arch::BiLstm, Arch::Tcn, Arch::AeMlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Lstm => "lstm",
            Arch::BiLstm => "bilstm",
            Arch::Tcn => "tcn",
            Arch::AeMlp => "ae_mlp",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Arch> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown arch '{s}' (expected one of: lstm, bilstm, tcn, ae_mlp)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub arch: Arch,
    /// Consecutive samples fed to the recurrent layers per step.
    pub frame: usize,
    pub hidden: usize,
    pub tcn_channels: usize,
    pub tcn_dilations: Vec<usize>,
    pub kernel: usize,
    /// Latent width of the autoencoder (AeMlp only).
    pub latent: usize,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            arch: Arch::Lstm,
            frame: 10,
            hidden: 32,
            tcn_channels: 16,
            tcn_dilations: vec![1, 2, 4],
            kernel: 3,
            latent: 8,
            lr: 1e-3,
            batch: 32,
            max_epochs: 50,
            patience: 5,
            folds: 4,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn new(arch: Arch, seed: u64) -> Self {
        DetectorConfig { arch, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frame", self.frame),
            ("hidden", self.hidden),
            ("tcn_channels", self.tcn_channels),
            ("kernel", self.kernel),
            ("latent", self.latent),
            ("batch", self.batch),
            ("max_epochs", self.max_epochs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.tcn_dilations.is_empty() || self.tcn_dilations.contains(&0) {
            return Err(Error::Config("tcn_dilations must be a nonempty list of positive integers".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::Config("patience must be smaller than max_epochs".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        Ok(())
    }
}
