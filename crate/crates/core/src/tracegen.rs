//! Parametric power-trace generators for the three device states and the
//! dummy-code perturbations of the scan phase.
//!
//! All generators are pure functions of their parameters and the supplied
//! random stream. Samples are in microamperes at 1 kHz.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::acf;
use crate::rng::Stream;

pub const SAMPLE_RATE_HZ: u32 = 1000;
/// Minimum run length; one detector window.
pub const MIN_RUN_SAMPLES: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Idle,
    #[serde(rename = "iot_service")]
    IoTService,
    Mirai,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Idle, ClassLabel::IoTService, ClassLabel::Mirai];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Idle => "idle",
            ClassLabel::IoTService => "iot_service",
            ClassLabel::Mirai => "mirai",
        }
    }

    pub fn is_benign(self) -> bool {
        self != ClassLabel::Mirai
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown label {s:?} (expected idle, iot_service or mirai)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    None,
    SingleFunction,
    OneForLoop,
    TwoNestedLoops,
    IfStatement,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::None,
        VariantKind::SingleFunction,
        VariantKind::OneForLoop,
        VariantKind::TwoNestedLoops,
        VariantKind::IfStatement,
    ];
    /// The four dummy-code variants, excluding the unmodified scan.
    pub const INJECTED: [VariantKind; 4] = [
        VariantKind::SingleFunction,
        VariantKind::OneForLoop,
        VariantKind::TwoNestedLoops,
        VariantKind::IfStatement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::None => "none",
            VariantKind::SingleFunction => "single_function",
            VariantKind::OneForLoop => "one_for_loop",
            VariantKind::TwoNestedLoops => "two_nested_loops",
            VariantKind::IfStatement => "if_statement",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|v| v.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|v| v.as_str()).collect();
            format!("unknown variant {s:?} (valid: {})", valid.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub id: String,
    pub baseline_ua: f64,
    pub noise_sigma_ua: f64,
    /// Multiplier on every event amplitude (bursts, spikes, variant effects).
    pub amp_scale: f64,
}

impl Default for DeviceProfile {
    fn default() -> Self {
        DeviceProfile { id: "dev0".into(), baseline_ua: 120_000.0, noise_sigma_ua: 2_000.0, amp_scale: 1.0 }
    }
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::param("device id must be nonempty"));
        }
        if !(self.baseline_ua >= 0.0 && self.baseline_ua.is_finite()) {
            return Err(Error::param(format!("baseline_ua must be >= 0, got {}", self.baseline_ua)));
        }
        if !(self.noise_sigma_ua > 0.0 && self.noise_sigma_ua.is_finite()) {
            return Err(Error::param(format!("noise_sigma_ua must be > 0, got {}", self.noise_sigma_ua)));
        }
        if !(self.amp_scale > 0.0 && self.amp_scale.is_finite()) {
            return Err(Error::param(format!("amp_scale must be > 0, got {}", self.amp_scale)));
        }
        Ok(())
    }

    /// Five heterogeneous handsets: baseline within ±20%, noise within ±50%,
    /// amplitude scale within [0.8, 1.2] of the default profile.
    pub fn builtin() -> Vec<DeviceProfile> {
        let table = [
            ("dev0", 120_000.0, 2_000.0, 1.0),
            ("dev1", 96_000.0, 1_000.0, 0.8),
            ("dev2", 144_000.0, 3_000.0, 1.2),
            ("dev3", 108_000.0, 1_500.0, 0.9),
            ("dev4", 132_000.0, 2_500.0, 1.1),
        ];
        table
            .into_iter()
            .map(|(id, baseline_ua, noise_sigma_ua, amp_scale)| DeviceProfile {
                id: id.into(),
                baseline_ua,
                noise_sigma_ua,
                amp_scale,
            })
            .collect()
    }
}

/// Event-driven service activity: Poisson-arrival rectangular bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceModel {
    pub burst_rate_hz: f64,
    pub burst_amp_ua: f64,
    pub burst_mean_dur_samples: usize,
}

impl Default for ServiceModel {
    fn default() -> Self {
        ServiceModel { burst_rate_hz: 30.0, burst_amp_ua: 40_000.0, burst_mean_dur_samples: 3 }
    }
}

impl ServiceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.burst_rate_hz > 0.0 && self.burst_rate_hz.is_finite()) {
            return Err(Error::param(format!("burst_rate_hz must be > 0, got {}", self.burst_rate_hz)));
        }
        if !(self.burst_amp_ua > 0.0 && self.burst_amp_ua.is_finite()) {
            return Err(Error::param(format!("burst_amp_ua must be > 0, got {}", self.burst_amp_ua)));
        }
        if self.burst_mean_dur_samples == 0 {
            return Err(Error::param("burst_mean_dur_samples must be positive"));
        }
        Ok(())
    }
}

/// Periodic scan-phase spike train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanModel {
    pub period_samples: usize,
    pub spike_amp_ua: f64,
    pub spike_width_samples: usize,
    /// Standard deviation of per-spike onset jitter, in samples.
    pub jitter_sigma: f64,
    /// Draw the first onset uniformly within one period; when false the
    /// train starts at sample 0.
    #[serde(default = "default_true")]
    pub random_phase: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ScanModel {
    fn default() -> Self {
        ScanModel {
            period_samples: 20,
            spike_amp_ua: 40_000.0,
            spike_width_samples: 3,
            jitter_sigma: 0.5,
            random_phase: true,
        }
    }
}

impl ScanModel {
    pub fn validate(&self) -> Result<()> {
        if self.period_samples == 0 || self.spike_width_samples == 0 {
            return Err(Error::param("scan period and spike width must be positive"));
        }
        if self.spike_width_samples >= self.period_samples {
            return Err(Error::param("spike_width_samples must be < period_samples"));
        }
        if !(self.spike_amp_ua > 0.0 && self.spike_amp_ua.is_finite()) {
            return Err(Error::param("spike_amp_ua must be > 0"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma < self.period_samples as f64 / 4.0) {
            return Err(Error::param("jitter_sigma must lie in [0, period_samples/4)"));
        }
        Ok(())
    }
}

/// Amplitude and timing effects of one dummy-code variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: VariantKind,
    pub extra_amp_ua: f64,
    /// Relative randomization of extra spike amplitudes, in [0, 1].
    pub extra_amp_spread: f64,
    /// Multiplier on the scan period (>= 1).
    pub timing_stretch: f64,
    /// Probability that a period takes the dummy branch (IfStatement).
    pub branch_prob: f64,
    /// Peak of the smooth inter-scan ripple (SingleFunction).
    pub ripple_amp_ua: f64,
    /// Width of each injected extra spike, in samples.
    pub extra_width_samples: usize,
    /// Extra onset-jitter variance, relative to the scan model's jitter.
    pub jitter_gain: f64,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec {
            kind: VariantKind::None,
            extra_amp_ua: 0.0,
            extra_amp_spread: 0.0,
            timing_stretch: 1.0,
            branch_prob: 0.0,
            ripple_amp_ua: 0.0,
            extra_width_samples: 0,
            jitter_gain: 0.0,
        }
    }

    /// Calibrated defaults per variant.
    pub fn default_for(kind: VariantKind) -> Self {
        let base = PerturbationSpec { kind, extra_width_samples: 1, ..Self::none() };
        match kind {
            VariantKind::None => Self::none(),
            VariantKind::SingleFunction => PerturbationSpec {
                ripple_amp_ua: 4_000.0,
                timing_stretch: 1.05,
                jitter_gain: 0.5,
                ..base
            },
            VariantKind::OneForLoop => PerturbationSpec {
                extra_amp_ua: 15_000.0,
                timing_stretch: 1.3,
                jitter_gain: 1.0,
                ..base
            },
            VariantKind::TwoNestedLoops => PerturbationSpec {
                extra_amp_ua: 30_000.0,
                extra_amp_spread: 0.5,
                timing_stretch: 1.8,
                jitter_gain: 2.0,
                ..base
            },
            VariantKind::IfStatement => PerturbationSpec {
                extra_amp_ua: 8_000.0,
                branch_prob: 0.4,
                timing_stretch: 1.1,
                jitter_gain: 1.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.timing_stretch >= 1.0 && self.timing_stretch.is_finite()) {
            return Err(Error::param(format!("timing_stretch must be >= 1, got {}", self.timing_stretch)));
        }
        if !(0.0..=1.0).contains(&self.branch_prob) {
            return Err(Error::param("branch_prob must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.extra_amp_spread) {
            return Err(Error::param("extra_amp_spread must lie in [0, 1]"));
        }
        if !finite_nonneg(self.extra_amp_ua) || !finite_nonneg(self.ripple_amp_ua) || !finite_nonneg(self.jitter_gain) {
            return Err(Error::param("amplitudes and jitter gain must be finite and >= 0"));
        }
        if self.kind == VariantKind::None {
            let inert = self.extra_amp_ua == 0.0
                && self.extra_amp_spread == 0.0
                && self.timing_stretch == 1.0
                && self.branch_prob == 0.0
                && self.ripple_amp_ua == 0.0
                && self.jitter_gain == 0.0;
            if !inert {
                return Err(Error::param("variant none must carry zero effects and stretch 1"));
            }
        } else if self.extra_width_samples == 0
            && matches!(self.kind, VariantKind::OneForLoop | VariantKind::TwoNestedLoops | VariantKind::IfStatement)
        {
            return Err(Error::param("extra_width_samples must be positive for spike-injecting variants"));
        }
        Ok(())
    }

    /// Scan period after the dummy code's execution delay.
    pub fn effective_period(&self, scan: &ScanModel) -> usize {
        ((scan.period_samples as f64 * self.timing_stretch).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRun {
    pub samples: Vec<f64>,
    /// 1 where the dummy code changed the sample value.
    pub perturb_mask: Vec<u8>,
    pub label: ClassLabel,
    pub variant: VariantKind,
    pub device: String,
    pub sample_rate_hz: u32,
    /// Ground-truth onsets of scan spikes (Mirai runs only; may be negative
    /// for a spike clipped at the start).
    pub scan_onsets: Vec<i64>,
    /// Scan spike width used for `scan_onsets`.
    pub spike_width: usize,
}

impl PowerRun {
    pub fn elapsed_samples(&self) -> usize {
        self.samples.len()
    }

    /// Indices covered by ground-truth scan spikes.
    pub fn spike_indices(&self) -> Vec<usize> {
        let n = self.samples.len() as i64;
        let mut out = Vec::new();
        for &s in &self.scan_onsets {
            for t in s..s + self.spike_width as i64 {
                if (0..n).contains(&t) {
                    out.push(t as usize);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < MIN_RUN_SAMPLES {
        return Err(Error::InvalidLength(format!("run needs at least {MIN_RUN_SAMPLES} samples, got {n}")));
    }
    Ok(())
}

fn idle_base(profile: &DeviceProfile, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            profile.baseline_ua + profile.noise_sigma_ua * z
        })
        .collect()
}

fn quiet_run(samples: Vec<f64>, label: ClassLabel, profile: &DeviceProfile) -> PowerRun {
    let n = samples.len();
    PowerRun {
        samples,
        perturb_mask: vec![0; n],
        label,
        variant: VariantKind::None,
        device: profile.id.clone(),
        sample_rate_hz: SAMPLE_RATE_HZ,
        scan_onsets: Vec::new(),
        spike_width: 0,
    }
}

/// Idle device: flat baseline plus white measurement noise.
pub fn synth_idle(profile: &DeviceProfile, n_samples: usize, rng: &mut impl Rng) -> Result<PowerRun> {
    check_len(n_samples)?;
    profile.validate()?;
    Ok(quiet_run(idle_base(profile, n_samples, rng), ClassLabel::Idle, profile))
}

/// Union coverage of Poisson-arrival bursts over `n` samples.
fn burst_cover(model: &ServiceModel, n: usize, rng: &mut impl Rng) -> Vec<bool> {
    let per_sample = model.burst_rate_hz / SAMPLE_RATE_HZ as f64;
    let gap = Exp::new(per_sample).expect("validated rate");
    let dur = Exp::new(1.0 / model.burst_mean_dur_samples as f64).expect("validated duration");
    let mut cover = vec![false; n];
    // Start early so bursts already in progress at t = 0 are represented.
    let lead = 8.0 * model.burst_mean_dur_samples as f64;
    let mut t = -lead + gap.sample(rng);
    while t < n as f64 {
        let d = (dur.sample(rng).round() as i64).max(1);
        let start = t.floor() as i64;
        for i in start.max(0)..(start + d).min(n as i64) {
            cover[i as usize] = true;
        }
        t += gap.sample(rng);
    }
    cover
}

/// Event-driven service activity on top of the idle baseline.
pub fn synth_service(
    profile: &DeviceProfile,
    n_samples: usize,
    model: &ServiceModel,
    rng: &mut impl Rng,
) -> Result<PowerRun> {
    check_len(n_samples)?;
    profile.validate()?;
    model.validate()?;
    let mut samples = idle_base(profile, n_samples, rng);
    let amp = model.burst_amp_ua * profile.amp_scale;
    for (x, on) in samples.iter_mut().zip(burst_cover(model, n_samples, rng)) {
        if on {
            *x += amp;
        }
    }
    Ok(quiet_run(samples, ClassLabel::IoTService, profile))
}

/// Onsets of a jittered spike train covering `[0, n)`.
fn scan_onsets(n: usize, period: usize, phase_u: f64, jitter_sd: f64, timing: &mut impl Rng) -> Vec<i64> {
    let phase = (phase_u * period as f64).floor();
    let count = n / period + 2;
    (-1..count as i64)
        .map(|k| {
            let z: f64 = StandardNormal.sample(timing);
            (phase + (k * period as i64) as f64 + jitter_sd * z).round() as i64
        })
        .collect()
}

fn add_spikes(samples: &mut [f64], onsets: &[i64], width: usize, amp: f64) {
    let n = samples.len() as i64;
    let mut cover = vec![false; samples.len()];
    for &s in onsets {
        for t in s.max(0)..(s + width as i64).min(n) {
            cover[t as usize] = true;
        }
    }
    for (x, on) in samples.iter_mut().zip(cover) {
        if on {
            *x += amp;
        }
    }
}

fn add_pulse(samples: &mut [f64], start: i64, width: usize, amp: f64) {
    let n = samples.len() as i64;
    for t in start.max(0)..(start + width as i64).min(n) {
        samples[t as usize] += amp;
    }
}

fn spread_amp(spec: &PerturbationSpec, scale: f64, rng: &mut impl Rng) -> f64 {
    let u: f64 = if spec.extra_amp_spread > 0.0 { rng.random_range(-1.0..1.0) } else { 0.0 };
    spec.extra_amp_ua * (1.0 + spec.extra_amp_spread * u) * scale
}

/// Add the variant's dummy-code effects between consecutive scan onsets.
fn apply_variant(
    samples: &mut [f64],
    onsets: &[i64],
    spike_width: usize,
    period: usize,
    spec: &PerturbationSpec,
    scale: f64,
    effects: &mut impl Rng,
) {
    let w = spike_width as i64;
    let xw = spec.extra_width_samples as i64;
    for pair in onsets.windows(2) {
        let (s, next) = (pair[0], pair[1].max(pair[0] + w + 1));
        // Gap between the end of this spike and the next onset.
        let gap_start = s + w;
        let gap_len = next - gap_start;
        match spec.kind {
            VariantKind::None => {}
            VariantKind::SingleFunction => {
                let amp = spec.ripple_amp_ua * scale;
                for i in 0..gap_len {
                    let t = gap_start + i;
                    if (0..samples.len() as i64).contains(&t) {
                        let phase = std::f64::consts::PI * (i as f64 + 0.5) / gap_len as f64;
                        samples[t as usize] += amp * phase.sin().powi(2);
                    }
                }
            }
            VariantKind::OneForLoop => {
                let amp = spread_amp(spec, scale, effects);
                add_pulse(samples, s + period as i64 / 2, spec.extra_width_samples, amp);
            }
            VariantKind::TwoNestedLoops => {
                let count = effects.random_range(2..=4);
                for _ in 0..count {
                    let amp = spread_amp(spec, scale, effects);
                    let room = (gap_len - xw).max(1);
                    let at = gap_start + effects.random_range(0..room);
                    add_pulse(samples, at, spec.extra_width_samples, amp);
                }
            }
            VariantKind::IfStatement => {
                let taken = effects.random_bool(spec.branch_prob);
                let amp = spread_amp(spec, scale, effects);
                let room = (gap_len - xw).max(1);
                let at = gap_start + effects.random_range(0..room);
                if taken {
                    add_pulse(samples, at, spec.extra_width_samples, amp);
                }
            }
        }
    }
}

/// Mirai scan phase, optionally modified by one dummy-code variant.
///
/// The noise, timing and effect draws come from separate streams.
/// `perturb_mask` marks exactly the samples changed by the dummy-code
/// effect (pulses, ripple) on top of the variant's stretched spike train.
pub fn synth_mirai(
    profile: &DeviceProfile,
    n_samples: usize,
    scan: &ScanModel,
    spec: &PerturbationSpec,
    rng: &mut impl Rng,
) -> Result<PowerRun> {
    check_len(n_samples)?;
    profile.validate()?;
    scan.validate()?;
    spec.validate()?;

    let noise_seed = rng.next_u64();
    let timing_seed = rng.next_u64();
    let effect_seed = rng.next_u64();
    let base = idle_base(profile, n_samples, &mut Stream::seed_from_u64(noise_seed));
    let amp = scan.spike_amp_ua * profile.amp_scale;

    let train = |period: usize, jitter_sd: f64| {
        let mut timing = Stream::seed_from_u64(timing_seed);
        let phase_u = if scan.random_phase { timing.random::<f64>() } else { 0.0 };
        scan_onsets(n_samples, period, phase_u, jitter_sd, &mut timing)
    };

    if spec.kind == VariantKind::None {
        let clean_onsets = train(scan.period_samples, scan.jitter_sigma);
        let mut clean = base;
        add_spikes(&mut clean, &clean_onsets, scan.spike_width_samples, amp);
        let n = clean.len();
        return Ok(PowerRun {
            samples: clean,
            perturb_mask: vec![0; n],
            label: ClassLabel::Mirai,
            variant: VariantKind::None,
            device: profile.id.clone(),
            sample_rate_hz: SAMPLE_RATE_HZ,
            scan_onsets: clean_onsets,
            spike_width: scan.spike_width_samples,
        });
    }

    let period = spec.effective_period(scan);
    let onsets = train(period, scan.jitter_sigma * (1.0 + spec.jitter_gain).sqrt());
    let mut samples = base;
    add_spikes(&mut samples, &onsets, scan.spike_width_samples, amp);
    let scan_only = samples.clone();
    apply_variant(
        &mut samples,
        &onsets,
        scan.spike_width_samples,
        period,
        spec,
        profile.amp_scale,
        &mut Stream::seed_from_u64(effect_seed),
    );
    let perturb_mask = samples.iter().zip(&scan_only).map(|(a, b)| u8::from(a != b)).collect();

    Ok(PowerRun {
        samples,
        perturb_mask,
        label: ClassLabel::Mirai,
        variant: spec.kind,
        device: profile.id.clone(),
        sample_rate_hz: SAMPLE_RATE_HZ,
        scan_onsets: onsets,
        spike_width: scan.spike_width_samples,
    })
}

/// ACF peak below this is treated as "no periodicity".
const MIN_PERIODIC_ACF: f64 = 0.2;

/// Vertex of the parabola through `r[l-1], r[l], r[l+1]`.
fn parabolic_peak(r: &[f64], l: usize) -> f64 {
    if l == 0 || l + 1 >= r.len() {
        return l as f64;
    }
    let (a, b, c) = (r[l - 1], r[l], r[l + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-12 {
        return l as f64;
    }
    l as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

fn is_local_max(r: &[f64], l: usize) -> bool {
    l > 0 && l + 1 < r.len() && r[l] >= r[l - 1] && r[l] >= r[l + 1]
}

/// Dominant period of a series, in (fractional) samples, from its
/// autocorrelation function.
///
/// The fundamental is the first local ACF maximum past the spike-width
/// shoulder that reaches half the highest peak. Its location is refined
/// through the highest harmonic that is still clearly visible.
pub fn dominant_period(series: &[f64]) -> Result<f64> {
    let max_lag = series.len() / 3;
    if max_lag < 4 {
        return Err(Error::Analysis("series too short for period estimation".into()));
    }
    let r = acf(series, max_lag).map_err(|e| Error::Analysis(format!("no periodicity: {e}")))?;
    let Some(first_dip) = r.iter().position(|&v| v <= 0.0) else {
        return Err(Error::Analysis("autocorrelation never decays; no periodic structure".into()));
    };
    let peak = r[first_dip..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak < MIN_PERIODIC_ACF {
        return Err(Error::Analysis(format!("no detectable periodicity (peak ACF {peak:.3})")));
    }
    let fundamental = (first_dip..r.len())
        .find(|&l| is_local_max(&r, l) && r[l] >= 0.5 * peak)
        .ok_or_else(|| Error::Analysis("no interior ACF peak".into()))?;
    let mut period = parabolic_peak(&r, fundamental);
    for m in 2.. {
        let centre = (m as f64 * period).round() as usize;
        if centre + 3 >= r.len() {
            break;
        }
        let Some(lm) = (centre - 2..=centre + 2).filter(|&l| is_local_max(&r, l)).max_by(|&a, &b| r[a].total_cmp(&r[b]))
        else {
            break;
        };
        if r[lm] < 0.5 * peak {
            break;
        }
        period = parabolic_peak(&r, lm) / m as f64;
    }
    Ok(period)
}

/// Elapsed-time ratio between a modified and an original run covering the
/// same number of scan events.
pub fn overhead_of(original: &PowerRun, modified: &PowerRun) -> Result<f64> {
    let p_orig = dominant_period(&original.samples)?;
    let p_mod = dominant_period(&modified.samples)?;
    Ok(p_mod / p_orig)
}
