use serde::{Deserialize, Serialize};

use super::config::{Arch, DetectorConfig};
use super::nets::Net;
use super::tensor::softmax;
use crate::error::{Error, Result};
use crate::features::Scaler;
use crate::tracegen::ClassLabel;

/// Class probabilities in (Idle, IoTService, Mirai) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbs {
    pub p: [f64; 3],
}

impl ClassProbs {
    pub fn from_logits(logits: &[f64; 3]) -> ClassProbs {
        ClassProbs { p: softmax(logits) }
    }

    /// Most probable class; ties go to the lower class index.
    pub fn argmax(&self) -> ClassLabel {
        let mut best = 0;
        for k in 1..3 {
            if self.p[k] > self.p[best] {
                best = k;
            }
        }
        ClassLabel::ALL[best]
    }

    pub fn prob(&self, class: ClassLabel) -> f64 {
        self.p[class.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub config: DetectorConfig,
    pub scaler: Scaler,
    pub net: Net,
    /// Epoch whose weights were kept (1-based).
    pub final_epoch: usize,
}

impl DetectorModel {
    pub fn arch(&self) -> Arch {
        self.config.arch
    }

    pub fn window_len(&self) -> usize {
        self.scaler.len()
    }

    /// Probabilities for an already standardized window.
    pub fn forward(&self, standardized: &[f64]) -> Result<ClassProbs> {
        if standardized.len() != self.window_len() {
            return Err(Error::Shape(format!(
                "model expects windows of length {}, got {}",
                self.window_len(),
                standardized.len()
            )));
        }
        Ok(ClassProbs::from_logits(&self.net.logits(standardized)))
    }

    /// Standardize a raw window with the attached scaler, then forward.
    pub fn predict(&self, raw: &[f64]) -> Result<ClassProbs> {
        self.forward(&self.scaler.apply(raw)?)
    }

    pub fn classify(&self, raw: &[f64]) -> Result<ClassLabel> {
        Ok(self.predict(raw)?.argmax())
    }
}

/// Probabilities of `model` on a standardized window.
pub fn forward(model: &DetectorModel, standardized: &[f64]) -> Result<ClassProbs> {
    model.forward(standardized)
}
