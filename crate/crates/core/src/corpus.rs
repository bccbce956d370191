//! Window extraction, dataset assembly with run-level splits, and the
//! newline-delimited dataset format.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::tracegen::{
    synth_idle, synth_mirai, synth_service, ClassLabel, DeviceProfile, PerturbationSpec, PowerRun, ScanModel,
    ServiceModel, VariantKind, SAMPLE_RATE_HZ,
};

pub const WINDOW_LEN: usize = 150;
pub const DATASET_FILE: &str = "windows.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORPUS_FORMAT: &str = "dummyscan-corpus/1";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub samples: Vec<f64>,
    pub perturb_mask: Vec<u8>,
    pub label: ClassLabel,
    pub device: String,
    pub variant: VariantKind,
    pub run_id: String,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Slice a run into 150-sample windows at `stride`.
pub fn windowize(run: &PowerRun, run_id: &str, stride: usize) -> Result<Vec<LabeledWindow>> {
    if stride == 0 {
        return Err(Error::param("stride must be positive"));
    }
    let n = run.samples.len();
    if n < WINDOW_LEN {
        return Err(Error::InvalidLength(format!("run {run_id} has {n} samples, need {WINDOW_LEN}")));
    }
    Ok((0..=n - WINDOW_LEN)
        .step_by(stride)
        .map(|offset| LabeledWindow {
            samples: run.samples[offset..offset + WINDOW_LEN].to_vec(),
            perturb_mask: run.perturb_mask[offset..offset + WINDOW_LEN].to_vec(),
            label: run.label,
            device: run.device.clone(),
            variant: run.variant,
            run_id: run_id.to_string(),
            offset,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub devices: Vec<DeviceProfile>,
    pub runs_per_class: usize,
    pub run_samples: usize,
    pub stride: usize,
    pub test_fraction: f64,
    pub service: ServiceModel,
    pub scan: ScanModel,
}

impl Default for CorpusConfig {
    /// Full-size layout: five devices, 340 runs per class, one window per run.
    fn default() -> Self {
        CorpusConfig {
            devices: DeviceProfile::builtin(),
            runs_per_class: 340,
            run_samples: WINDOW_LEN,
            stride: WINDOW_LEN,
            test_fraction: 0.15,
            service: ServiceModel::default(),
            scan: ScanModel::default(),
        }
    }
}

impl CorpusConfig {
    /// Desk-scale default: 40 runs per class.
    pub fn desk() -> Self {
        CorpusConfig { runs_per_class: 40, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::Config("at least one device profile is required".into()));
        }
        for d in &self.devices {
            d.validate().map_err(|e| Error::Config(format!("device {}: {e}", d.id)))?;
        }
        let mut ids: Vec<&str> = self.devices.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("device ids must be unique".into()));
        }
        if self.runs_per_class < 4 {
            return Err(Error::Config(format!(
                "runs_per_class = {} cannot honor a train/test split (need >= 4)",
                self.runs_per_class
            )));
        }
        if self.run_samples < WINDOW_LEN || self.stride == 0 {
            return Err(Error::Config("run_samples must be >= 150 and stride positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        self.service.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.scan.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub master_seed: u64,
    pub config: CorpusConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub windows: Vec<LabeledWindow>,
    pub splits: Vec<Split>,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn split(&self, which: Split) -> Vec<&LabeledWindow> {
        self.windows.iter().zip(&self.splits).filter(|(_, s)| **s == which).map(|(w, _)| w).collect()
    }

    pub fn train(&self) -> Vec<&LabeledWindow> {
        self.split(Split::Train)
    }

    pub fn test(&self) -> Vec<&LabeledWindow> {
        self.split(Split::Test)
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for w in &self.windows {
            c[w.label.index()] += 1;
        }
        c
    }
}

fn run_id(device: &str, class: ClassLabel, run: usize) -> String {
    format!("{device}-{class}-{run:04}")
}

/// Generate one run of `class` on `device` from its own derived stream.
pub fn generate_run(config: &CorpusConfig, master_seed: u64, device_idx: usize, class: ClassLabel, run: usize) -> Result<PowerRun> {
    let profile = &config.devices[device_idx];
    let mut rng = stream(master_seed, &[domain::CORPUS, device_idx as u64, class.index() as u64, run as u64]);
    let n = config.run_samples;
    match class {
        ClassLabel::Idle => synth_idle(profile, n, &mut rng),
        ClassLabel::IoTService => synth_service(profile, n, &config.service, &mut rng),
        ClassLabel::Mirai => synth_mirai(profile, n, &config.scan, &PerturbationSpec::none(), &mut rng),
    }
}

/// Per-class test counts: floors of `fraction * n_c`, remainder handed out by
/// largest fractional part (then class order) until the total reaches
/// `round(fraction * N)`.
fn test_allocation(counts: [usize; 3], fraction: f64) -> [usize; 3] {
    let total: usize = counts.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let ideal: Vec<f64> = counts.iter().map(|&c| fraction * c as f64).collect();
    let mut alloc = [0usize; 3];
    for i in 0..3 {
        alloc[i] = ideal[i].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    let mut assigned: usize = alloc.iter().sum();
    for &i in order.iter().cycle() {
        if assigned >= target {
            break;
        }
        if alloc[i] < counts[i] {
            alloc[i] += 1;
            assigned += 1;
        }
    }
    alloc
}

/// Build the clean three-class corpus.
pub fn build_corpus(config: &CorpusConfig, master_seed: u64) -> Result<Corpus> {
    config.validate()?;
    let mut windows = Vec::new();
    // Run ids per class, in generation order.
    let mut runs_by_class: [Vec<String>; 3] = Default::default();
    for (d, profile) in config.devices.iter().enumerate() {
        for class in ClassLabel::ALL {
            for r in 0..config.runs_per_class {
                let id = run_id(&profile.id, class, r);
                let run = generate_run(config, master_seed, d, class, r)?;
                windows.extend(windowize(&run, &id, config.stride)?);
                runs_by_class[class.index()].push(id);
            }
        }
    }

    let counts = [runs_by_class[0].len(), runs_by_class[1].len(), runs_by_class[2].len()];
    let alloc = test_allocation(counts, config.test_fraction);
    let mut test_runs = std::collections::HashSet::new();
    for class in ClassLabel::ALL {
        let mut ids = runs_by_class[class.index()].clone();
        ids.shuffle(&mut stream(master_seed, &[domain::SPLIT, class.index() as u64]));
        test_runs.extend(ids.into_iter().take(alloc[class.index()]));
    }
    let splits = windows.iter().map(|w| if test_runs.contains(&w.run_id) { Split::Test } else { Split::Train }).collect();

    Ok(Corpus {
        windows,
        splits,
        manifest: Manifest { format: CORPUS_FORMAT.into(), master_seed, config: config.clone() },
    })
}

/// Mirai windows carrying one dummy-code variant, one window per run, runs
/// cycling through the configured devices. `tag` separates independent
/// generation purposes (attack evaluation, adversarial augmentation, ...).
pub fn perturbed_windows(
    config: &CorpusConfig,
    spec: &PerturbationSpec,
    n_runs: usize,
    master_seed: u64,
    tag: u64,
) -> Result<Vec<LabeledWindow>> {
    config.validate()?;
    let mut out = Vec::with_capacity(n_runs);
    for r in 0..n_runs {
        let d = r % config.devices.len();
        let profile = &config.devices[d];
        let mut rng = stream(master_seed, &[tag, spec.kind.index() as u64, r as u64]);
        let run = synth_mirai(profile, WINDOW_LEN, &config.scan, spec, &mut rng)?;
        let id = format!("{}-mirai-{}-{r:04}", profile.id, spec.kind);
        out.extend(windowize(&run, &id, WINDOW_LEN)?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Record<'a> {
    run_id: std::borrow::Cow<'a, str>,
    device_id: std::borrow::Cow<'a, str>,
    label: ClassLabel,
    variant: VariantKind,
    sample_rate_hz: u32,
    unit: std::borrow::Cow<'a, str>,
    split: Split,
    offset: usize,
    samples: std::borrow::Cow<'a, [f64]>,
    perturb_mask: std::borrow::Cow<'a, [u8]>,
}

/// Write windows to `<dir>/windows.jsonl` with their split tags.
pub fn save_windows(dir: &Path, windows: &[LabeledWindow], splits: &[Split]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(DATASET_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    for (w, split) in windows.iter().zip(splits) {
        let rec = Record {
            run_id: (&w.run_id).into(),
            device_id: (&w.device).into(),
            label: w.label,
            variant: w.variant,
            sample_rate_hz: SAMPLE_RATE_HZ,
            unit: "uA".into(),
            split: *split,
            offset: w.offset,
            samples: w.samples.as_slice().into(),
            perturb_mask: w.perturb_mask.as_slice().into(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::io(&path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))
}

pub fn save(corpus: &Corpus, dir: &Path) -> Result<()> {
    save_windows(dir, &corpus.windows, &corpus.splits)?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&corpus.manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Read `<dir>/windows.jsonl`, validating every record.
pub fn load_windows(dir: &Path) -> Result<(Vec<LabeledWindow>, Vec<Split>)> {
    let path = dir.join(DATASET_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut windows = Vec::new();
    let mut splits = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::format(&path, lineno, e.to_string()))?;
        if rec.samples.len() != WINDOW_LEN {
            return Err(Error::format(&path, lineno, format!("expected {WINDOW_LEN} samples, found {}", rec.samples.len())));
        }
        if rec.perturb_mask.len() != WINDOW_LEN || rec.perturb_mask.iter().any(|&b| b > 1) {
            return Err(Error::format(&path, lineno, "perturb_mask must hold 150 bits"));
        }
        if rec.sample_rate_hz != SAMPLE_RATE_HZ || rec.unit != "uA" {
            return Err(Error::format(&path, lineno, "expected sample_rate_hz 1000 and unit uA"));
        }
        if rec.label != ClassLabel::Mirai && rec.perturb_mask.iter().any(|&b| b == 1) {
            return Err(Error::format(&path, lineno, "benign window with a nonzero perturbation mask"));
        }
        splits.push(rec.split);
        windows.push(LabeledWindow {
            samples: rec.samples.into_owned(),
            perturb_mask: rec.perturb_mask.into_owned(),
            label: rec.label,
            device: rec.device_id.into_owned(),
            variant: rec.variant,
            run_id: rec.run_id.into_owned(),
            offset: rec.offset,
        });
    }
    Ok((windows, splits))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.line(), e.to_string()))?;
    if manifest.format != CORPUS_FORMAT {
        return Err(Error::format(&path, 1, format!("unsupported corpus format {:?}", manifest.format)));
    }
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<Corpus> {
    let manifest = load_manifest(dir)?;
    let (windows, splits) = load_windows(dir)?;
    Ok(Corpus { windows, splits, manifest })
}
