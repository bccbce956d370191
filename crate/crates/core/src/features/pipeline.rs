use serde::{Deserialize, Serialize};

use super::{acf, haar_dwt, pad_to_pow2, PcaModel, Scaler};
use crate::error::{Error, Result};

/// Optional analyst-side channels appended to the standardized window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Append ACF lags 1..=n.
    pub acf_lags: Option<usize>,
    /// Append all Haar coefficients of the zero-padded window.
    pub dwt_levels: Option<usize>,
    /// Append k principal-component scores.
    pub pca_components: Option<usize>,
}

/// Standardize a raw window and append the requested feature channels.
pub fn feature_pipeline(
    window: &[f64],
    scaler: Option<&Scaler>,
    pca: Option<&PcaModel>,
    options: &FeatureOptions,
) -> Result<Vec<f64>> {
    let scaler = scaler.ok_or_else(|| Error::State("feature pipeline requires a fitted scaler".into()))?;
    let z = scaler.apply(window)?;
    let mut out = z.clone();
    if let Some(lags) = options.acf_lags {
        out.extend_from_slice(&acf(&z, lags)?[1..]);
    }
    if let Some(levels) = options.dwt_levels {
        out.extend(haar_dwt(&pad_to_pow2(&z), levels)?.flatten());
    }
    if let Some(k) = options.pca_components {
        let model = pca.ok_or_else(|| Error::State(format!("pca({k}) requested without a fitted PCA model")))?;
        if model.k() != k {
            return Err(Error::State(format!("PCA model has {} components, {k} requested", model.k())));
        }
        out.extend(model.project(&z)?);
    }
    Ok(out)
}
