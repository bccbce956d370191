use serde::{Deserialize, Serialize};

use super::basic::{anova_oneway, mean, pearson, TestResult};
use super::granger::{granger, significance_fraction, GrangerResult};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::tracegen::{overhead_of, synth_mirai, DeviceProfile, PerturbationSpec, PowerRun, ScanModel, VariantKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub runs: usize,
    /// Scan events per run; run length is events × effective period.
    pub scan_events: usize,
    pub max_lag: usize,
    pub alpha: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig { runs: 200, scan_events: 40, max_lag: 3, alpha: 0.05 }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::Config("battery needs at least 2 runs per variant".into()));
        }
        if self.scan_events < 2 || self.max_lag == 0 {
            return Err(Error::Config("scan_events must be >= 2 and max_lag >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: VariantKind,
    pub n_runs: usize,
    /// Mean over runs of pearson(perturb_mask, samples); `None` when the
    /// mask is constant in every run.
    pub pearson_mask: Option<f64>,
    /// Mean over runs of pearson(original, modified) on event-aligned
    /// segments (see [`event_aligned`]).
    pub pearson_aligned: f64,
    /// Mean over runs of pearson(original, modified), both truncated to the
    /// shorter run.
    pub pearson_truncated: f64,
    /// Original vs this variant, on per-run excess charge per scan event.
    pub anova: TestResult,
    /// Per-lag significance fraction of mask → power Granger tests.
    pub granger_fraction: Option<Vec<f64>>,
    pub n_granger: usize,
    pub mean_overhead: Option<f64>,
    pub n_overhead: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub rows: Vec<VariantRow>,
    /// Original plus every non-None variant.
    pub omnibus: TestResult,
    pub alpha: f64,
    pub max_lag: usize,
}

/// Paired runs for one variant: run r uses device r mod D and the stream
/// (seed, BATTERY, r), so run r of every variant shares noise and timing draws.
pub fn battery_runs(
    devices: &[DeviceProfile],
    scan: &ScanModel,
    spec: &PerturbationSpec,
    config: &BatteryConfig,
    seed: u64,
) -> Result<Vec<PowerRun>> {
    config.validate()?;
    if devices.is_empty() {
        return Err(Error::param("battery needs at least one device profile"));
    }
    let n = config.scan_events * spec.effective_period(scan);
    (0..config.runs)
        .map(|r| {
            let mut rng = stream(seed, &[domain::BATTERY, r as u64]);
            synth_mirai(&devices[r % devices.len()], n, scan, spec, &mut rng)
        })
        .collect()
}

/// Scan-attributable charge per event in units of the device's amplitude scale:
/// Σ (x_t − baseline) / (events · amp_scale).
pub fn event_charge(run: &PowerRun, devices: &[DeviceProfile], scan_events: usize) -> Result<f64> {
    let p = devices
        .iter()
        .find(|d| d.id == run.device)
        .ok_or_else(|| Error::param(format!("run from unknown device '{}'", run.device)))?;
    let excess: f64 = run.samples.iter().map(|x| x - p.baseline_ua).sum();
    Ok(excess / (scan_events as f64 * p.amp_scale))
}

/// Cut both runs into one segment per scan event, starting at matching
/// onsets, and concatenate. The segment length is the original's mean onset
/// spacing, so every segment spans one spike plus the following gap.
pub fn event_aligned(original: &PowerRun, modified: &PowerRun) -> Result<(Vec<f64>, Vec<f64>)> {
    let on = &original.scan_onsets;
    if on.len() < 2 || modified.scan_onsets.is_empty() {
        return Err(Error::param("event alignment needs at least two scan events"));
    }
    let seg = ((on[on.len() - 1] - on[0]) / (on.len() as i64 - 1)).max(1);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&o, &m) in on.iter().zip(&modified.scan_onsets) {
        let fits = |s: i64, n: usize| s >= 0 && s + seg <= n as i64;
        if fits(o, original.samples.len()) && fits(m, modified.samples.len()) {
            a.extend_from_slice(&original.samples[o as usize..(o + seg) as usize]);
            b.extend_from_slice(&modified.samples[m as usize..(m + seg) as usize]);
        }
    }
    Ok((a, b))
}

fn charges(runs: &[PowerRun], devices: &[DeviceProfile], events: usize) -> Result<Vec<f64>> {
    runs.iter().map(|r| event_charge(r, devices, events)).collect()
}

fn row(
    original: &[PowerRun],
    modified: &[PowerRun],
    base_charge: &[f64],
    devices: &[DeviceProfile],
    config: &BatteryConfig,
) -> Result<VariantRow> {
    let variant = modified[0].variant;
    if modified.iter().any(|r| r.variant != variant) {
        return Err(Error::param("modified runs of one row must share a variant"));
    }
    let mut mask_r = Vec::new();
    let mut aligned = Vec::with_capacity(modified.len());
    let mut truncated = Vec::with_capacity(modified.len());
    let mut tests: Vec<GrangerResult> = Vec::new();
    let mut overheads = Vec::new();
    for (o, m) in original.iter().zip(modified) {
        let mask: Vec<f64> = m.perturb_mask.iter().map(|&b| f64::from(b)).collect();
        match pearson(&mask, &m.samples) {
            Ok(r) => mask_r.push(r),
            Err(Error::Undefined(_)) => {}
            Err(e) => return Err(e),
        }
        let k = o.samples.len().min(m.samples.len());
        truncated.push(pearson(&o.samples[..k], &m.samples[..k])?);
        let (a, b) = event_aligned(o, m)?;
        aligned.push(pearson(&a, &b)?);
        match granger(&mask, &m.samples, config.max_lag) {
            Ok(g) => tests.push(g),
            Err(Error::Regression(_) | Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
        if let Ok(v) = overhead_of(o, m) {
            overheads.push(v);
        }
    }
    let charge = charges(modified, devices, config.scan_events)?;
    Ok(VariantRow {
        variant,
        n_runs: modified.len(),
        pearson_mask: (!mask_r.is_empty()).then(|| mean(&mask_r)),
        pearson_aligned: mean(&aligned),
        pearson_truncated: mean(&truncated),
        anova: anova_oneway(&[base_charge, charge.as_slice()])?,
        granger_fraction: if tests.is_empty() { None } else { Some(significance_fraction(&tests, config.alpha)?) },
        n_granger: tests.len(),
        mean_overhead: (!overheads.is_empty()).then(|| mean(&overheads)),
        n_overhead: overheads.len(),
    })
}

/// Statistical comparison of original runs against each modified set.
/// `modified[v][r]` must be the same-seed counterpart of `original[r]`.
pub fn variant_battery(
    devices: &[DeviceProfile],
    original: &[PowerRun],
    modified: &[Vec<PowerRun>],
    config: &BatteryConfig,
) -> Result<BatteryReport> {
    config.validate()?;
    if original.len() < 2 {
        return Err(Error::param("battery needs at least 2 original runs"));
    }
    if modified.is_empty() {
        return Err(Error::param("battery needs at least one modified set"));
    }
    if let Some(m) = modified.iter().find(|m| m.len() != original.len()) {
        return Err(Error::param(format!("modified set has {} runs, original has {}", m.len(), original.len())));
    }
    let base = charges(original, devices, config.scan_events)?;
    let rows = modified.iter().map(|m| row(original, m, &base, devices, config)).collect::<Result<Vec<_>>>()?;
    let mut groups = vec![base];
    for m in modified.iter().filter(|m| m[0].variant != VariantKind::None) {
        groups.push(charges(m, devices, config.scan_events)?);
    }
    let omnibus = if groups.len() >= 2 {
        anova_oneway(&groups)?
    } else {
        TestResult { statistic: 0.0, p_value: 1.0, df: (0.0, 0.0) }
    };
    Ok(BatteryReport { rows, omnibus, alpha: config.alpha, max_lag: config.max_lag })
}

/// Generate paired runs for `specs` and run [`variant_battery`].
pub fn run_battery(
    devices: &[DeviceProfile],
    scan: &ScanModel,
    specs: &[PerturbationSpec],
    config: &BatteryConfig,
    seed: u64,
) -> Result<BatteryReport> {
    let original = battery_runs(devices, scan, &PerturbationSpec::none(), config, seed)?;
    let modified = specs.iter().map(|s| battery_runs(devices, scan, s, config, seed)).collect::<Result<Vec<_>>>()?;
    variant_battery(devices, &original, &modified, config)
}
