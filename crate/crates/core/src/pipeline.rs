//! End-to-end experiment: corpus, clean training, attacks, defenses,
//! perturbation statistics and attribution, with every table emitted from
//! one master seed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::corpus::{self, build_corpus, perturbed_windows, Corpus, LabeledWindow};
use crate::detect::{evaluate, save_model, train, Arch, DetectorModel, Metrics};
use crate::error::Result;
use crate::evade::{adversarial_train, compute_asr, compute_asr_with, defend_predict, fit_noise_defense, AsrEntry, NoiseBandDefense};
use crate::experiment::ExperimentConfig;
use crate::explain::{explain_runs, mean_abs, overlay_points, spike_windows, Attribution, ShapleyParams, SpikeOverlap};
use crate::report::{build_tables, write_file, Provenance, Row, NA};
use crate::rng::{domain, stream};
use crate::stats::{run_battery, BatteryReport};
use crate::tracegen::{ClassLabel, VariantKind};

pub fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance { seed: cfg.seed, digest: cfg.digest() }
}

pub fn metric_rows(arch: Arch, defense: &str, m: &Metrics) -> Vec<Row> {
    [("accuracy", m.accuracy), ("precision", m.precision), ("recall", m.recall), ("f1", m.f1)]
        .into_iter()
        .map(|(k, v)| Row::new(arch, "none", defense, k, v))
        .collect()
}

pub fn asr_rows(e: &AsrEntry, defense: &str) -> Vec<Row> {
    vec![
        Row::new(e.arch, e.variant, defense, "asr", e.asr),
        Row::new(e.arch, e.variant, defense, "to_idle", e.to_idle as f64),
        Row::new(e.arch, e.variant, defense, "to_iot", e.to_iot as f64),
        Row::new(e.arch, e.variant, defense, "n_windows", e.n_windows as f64),
    ]
}

pub fn battery_rows(b: &BatteryReport) -> Vec<Row> {
    let mut rows = Vec::new();
    for r in &b.rows {
        let mut push = |m: &str, v: f64| rows.push(Row::new(NA, r.variant, "battery", m, v));
        push("pearson_mask", r.pearson_mask.unwrap_or(f64::NAN));
        push("pearson_aligned", r.pearson_aligned);
        push("pearson_truncated", r.pearson_truncated);
        push("anova_f", r.anova.statistic);
        push("anova_p", r.anova.p_value);
        for lag in 1..=b.max_lag {
            let v = r.granger_fraction.as_ref().map_or(f64::NAN, |g| g[lag - 1]);
            push(&format!("granger_lag{lag}"), v);
        }
        push("overhead", r.mean_overhead.unwrap_or(f64::NAN));
        push("n_runs", r.n_runs as f64);
    }
    rows.push(Row::new(NA, "all", "battery", "anova_f", b.omnibus.statistic));
    rows.push(Row::new(NA, "all", "battery", "anova_p", b.omnibus.p_value));
    rows
}

pub fn explain_rows(
    arch: Arch,
    class: ClassLabel,
    importance: &[f64],
    group_size: usize,
    overlap: Option<&SpikeOverlap>,
    overlay: &[usize],
) -> Vec<Row> {
    let row = |metric: String, v: f64| Row::new(arch, class, "explain", metric, v);
    let mut rows: Vec<Row> = importance.iter().enumerate().map(|(g, &v)| row(format!("importance_g{g:02}"), v)).collect();
    rows.push(row("group_size".into(), group_size as f64));
    if let Some(o) = overlap {
        rows.push(row("spike_overlap_rate".into(), o.rate));
        rows.push(row("max_efficiency_gap".into(), o.max_efficiency_gap));
    }
    rows.extend(overlay.iter().map(|&t| row("overlay_t".into(), t as f64)));
    rows
}

/// Fraction of `windows` classified correctly, each through the noise defense.
pub fn defended_accuracy(
    model: &DetectorModel,
    defense: &NoiseBandDefense,
    windows: &[&LabeledWindow],
    rng: &mut impl rand::Rng,
) -> Result<f64> {
    let mut correct = 0;
    for w in windows {
        if defend_predict(model, defense, &w.samples, rng)?.argmax() == w.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / windows.len().max(1) as f64)
}

/// Noise defense for one variant: clean training Mirai windows against
/// windows from the NOISE_DEFENSE stream.
pub fn fit_variant_defense(cfg: &ExperimentConfig, train_windows: &[&LabeledWindow], kind: VariantKind) -> Result<NoiseBandDefense> {
    let spec = cfg.variant(kind)?;
    let fit = perturbed_windows(&cfg.corpus, spec, cfg.eval.noise_fit_runs, cfg.seed, domain::NOISE_DEFENSE)?;
    let clean: Vec<&[f64]> =
        train_windows.iter().filter(|w| w.label == ClassLabel::Mirai).map(|w| w.samples.as_slice()).collect();
    let perturbed: Vec<&[f64]> = fit.iter().map(|w| w.samples.as_slice()).collect();
    fit_noise_defense(&clean, &perturbed, cfg.eval.noise_top_fraction, cfg.eval.noise_sigma_scale)
}

pub fn attack_windows(cfg: &ExperimentConfig, kind: VariantKind) -> Result<Vec<LabeledWindow>> {
    perturbed_windows(&cfg.corpus, cfg.variant(kind)?, cfg.eval.attack_runs, cfg.seed, domain::ATTACK)
}

/// Streams for the noise defense: `purpose` 1 is attack windows, 2 clean test windows.
pub fn noise_stream(seed: u64, purpose: u64, arch: Arch, kind: VariantKind) -> crate::rng::Stream {
    stream(seed, &[domain::NOISE_DEFENSE, purpose, arch as u64, kind.index() as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseOutcome {
    pub asr: AsrEntry,
    pub clean_accuracy: f64,
    pub band_indices: Vec<usize>,
}

/// Defended ASR on `attack` and defended accuracy on the clean `test` windows.
pub fn noise_outcome(
    seed: u64,
    model: &DetectorModel,
    defense: &NoiseBandDefense,
    kind: VariantKind,
    attack: &[LabeledWindow],
    test: &[&LabeledWindow],
) -> Result<NoiseOutcome> {
    let arch = model.arch();
    let refs: Vec<&LabeledWindow> = attack.iter().collect();
    let mut rng = noise_stream(seed, 1, arch, kind);
    let asr = compute_asr_with(arch, &refs, |w| defend_predict(model, defense, w, &mut rng))?;
    let clean_accuracy = defended_accuracy(model, defense, test, &mut noise_stream(seed, 2, arch, kind))?;
    Ok(NoiseOutcome { asr, clean_accuracy, band_indices: defense.band_indices.clone() })
}

pub fn band_rows(kind: VariantKind, defense: &NoiseBandDefense) -> Vec<Row> {
    defense.band_indices.iter().map(|&b| Row::new(NA, kind, "noise_inject", "band_bin", b as f64)).collect()
}

pub fn noise_rows(n: &NoiseOutcome) -> Vec<Row> {
    let mut rows = asr_rows(&n.asr, "noise_inject");
    rows.push(Row::new(n.asr.arch, n.asr.variant, "noise_inject", "clean_accuracy", n.clean_accuracy));
    rows
}

#[derive(Debug, Clone)]
pub struct PipelineResults {
    pub corpus: Corpus,
    pub clean: Vec<(Arch, Metrics)>,
    pub asr: Vec<AsrEntry>,
    pub adv_clean: Vec<(Arch, Metrics)>,
    pub adv_asr: Vec<AsrEntry>,
    pub noise: Vec<NoiseOutcome>,
    pub battery: BatteryReport,
    pub explain: Vec<(Arch, SpikeOverlap, Vec<Attribution>)>,
    pub rows: Vec<Row>,
    /// Wall time per stage; not written to any file.
    pub timings: BTreeMap<&'static str, Duration>,
}

impl PipelineResults {
    pub fn clean_of(&self, arch: Arch) -> Option<&Metrics> {
        self.clean.iter().find(|(a, _)| *a == arch).map(|(_, m)| m)
    }

    pub fn asr_of(&self, arch: Arch, kind: VariantKind) -> Option<&AsrEntry> {
        self.asr.iter().find(|e| e.arch == arch && e.variant == kind)
    }

    pub fn adv_asr_of(&self, arch: Arch, kind: VariantKind) -> Option<&AsrEntry> {
        self.adv_asr.iter().find(|e| e.arch == arch && e.variant == kind)
    }

    pub fn noise_of(&self, arch: Arch, kind: VariantKind) -> Option<&NoiseOutcome> {
        self.noise.iter().find(|n| n.asr.arch == arch && n.asr.variant == kind)
    }
}

/// Run every stage. With `out`, writes config.json, corpus/, models/ and
/// reports/ under it.
pub fn run_pipeline(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PipelineResults> {
    cfg.validate()?;
    let prov = provenance(cfg);
    let mut timings = BTreeMap::new();
    let mut rows = Vec::new();
    let archs: Vec<Arch> = cfg.detectors.iter().map(|d| d.arch).collect();
    let kinds: Vec<VariantKind> = cfg.variants.iter().map(|v| v.kind).collect();

    let t = Instant::now();
    let corpus = build_corpus(&cfg.corpus, cfg.seed)?;
    if let Some(dir) = out {
        let models = dir.join("models");
        std::fs::create_dir_all(&models).map_err(|e| crate::error::Error::io(&models, e))?;
        cfg.save(&dir.join("config.json"))?;
        corpus::save(&corpus, &dir.join("corpus"))?;
    }
    let train_w = corpus.train();
    let test_w = corpus.test();
    timings.insert("generate", t.elapsed());

    let t = Instant::now();
    let mut models = Vec::new();
    let mut clean = Vec::new();
    for &arch in &archs {
        let (model, _) = train(&cfg.detector(arch)?, &train_w)?;
        let m = evaluate(&model, &test_w)?;
        rows.extend(metric_rows(arch, "none", &m));
        if let Some(dir) = out {
            save_model(&model, &dir.join("models").join(format!("{arch}.model")))?;
        }
        clean.push((arch, m));
        models.push(model);
    }
    timings.insert("train", t.elapsed());

    let t = Instant::now();
    let attacks: Vec<Vec<LabeledWindow>> = kinds.iter().map(|&k| attack_windows(cfg, k)).collect::<Result<_>>()?;
    let mut asr = Vec::new();
    for model in &models {
        for ws in &attacks {
            let refs: Vec<&LabeledWindow> = ws.iter().collect();
            let e = compute_asr(model, &refs)?;
            rows.extend(asr_rows(&e, "none"));
            asr.push(e);
        }
    }
    timings.insert("attack", t.elapsed());

    let t = Instant::now();
    let mut adv_asr = Vec::new();
    let mut adv_clean = Vec::new();
    for &arch in &archs {
        let (model, _) = adversarial_train(&cfg.detector(arch)?, &train_w, &cfg.corpus, &kinds)?;
        let m = evaluate(&model, &test_w)?;
        rows.extend(metric_rows(arch, "adv_train", &m));
        if let Some(dir) = out {
            save_model(&model, &dir.join("models").join(format!("{arch}-adv_train.model")))?;
        }
        for ws in &attacks {
            let refs: Vec<&LabeledWindow> = ws.iter().collect();
            let e = compute_asr(&model, &refs)?;
            rows.extend(asr_rows(&e, "adv_train"));
            adv_asr.push(e);
        }
        adv_clean.push((arch, m));
    }
    timings.insert("adv_train", t.elapsed());

    let t = Instant::now();
    let defenses: Vec<NoiseBandDefense> =
        kinds.iter().map(|&k| fit_variant_defense(cfg, &train_w, k)).collect::<Result<_>>()?;
    let mut noise = Vec::new();
    for model in &models {
        for ((ws, defense), &kind) in attacks.iter().zip(&defenses).zip(&kinds) {
            let outcome = noise_outcome(cfg.seed, model, defense, kind, ws, &test_w)?;
            rows.extend(noise_rows(&outcome));
            noise.push(outcome);
        }
    }
    for (defense, &kind) in defenses.iter().zip(&kinds) {
        rows.extend(band_rows(kind, defense));
    }
    timings.insert("noise_defense", t.elapsed());

    let t = Instant::now();
    let battery = run_battery(&cfg.corpus.devices, &cfg.corpus.scan, &cfg.variants, &cfg.eval.battery, cfg.seed)?;
    rows.extend(battery_rows(&battery));
    timings.insert("battery", t.elapsed());

    let t = Instant::now();
    let params = ShapleyParams {
        permutations: cfg.eval.shapley_permutations,
        group_size: cfg.eval.shapley_group_size,
        seed: cfg.seed,
    };
    let runs = spike_windows(&cfg.corpus, cfg.eval.explain_windows, cfg.seed)?;
    let mut explain = Vec::new();
    for (model, &arch) in models.iter().zip(&archs) {
        let (attrs, overlap) = explain_runs(model, &runs, &params)?;
        let importance = mean_abs(&attrs)?;
        let agg = Attribution {
            values: importance.clone(),
            group_size: params.group_size,
            target_class: ClassLabel::Mirai,
            n_permutations: params.permutations,
        };
        let overlay = overlay_points(&agg, cfg.eval.overlay_top_q)?;
        rows.extend(explain_rows(arch, ClassLabel::Mirai, &importance, params.group_size, Some(&overlap), &overlay));
        if let Some(dir) = out {
            let text = format!("{}\n{}", prov.header("attribution"), attrs[0].to_table());
            write_file(&dir.join("reports").join(format!("attribution_{arch}.tsv")), &text)?;
        }
        explain.push((arch, overlap, attrs));
    }
    timings.insert("explain", t.elapsed());

    if let Some(dir) = out {
        for (name, text) in build_tables(&prov, &rows) {
            write_file(&dir.join("reports").join(name), &text)?;
        }
    }
    Ok(PipelineResults { corpus, clean, asr, adv_clean, adv_asr, noise, battery, explain, rows, timings })
}
