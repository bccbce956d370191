use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dummyscan::corpus::{self, build_corpus, LabeledWindow};
use dummyscan::detect::{self, cross_validate, evaluate, load_model, save_model, Arch, DetectorModel};
use dummyscan::evade::{adversarial_train, compute_asr};
use dummyscan::experiment::ExperimentConfig;
use dummyscan::explain::{aggregate_importance, overlay_points, Attribution, ShapleyParams};
use dummyscan::pipeline::{self, provenance};
use dummyscan::report::{self, merge_provenance, read_long, write_file, write_long, Row, LONG_COLUMNS};
use dummyscan::stats::run_battery;
use dummyscan::{ClassLabel, Error, Result, VariantKind};

use crate::Common;

/// Config file written next to a generated corpus.
pub const EXPERIMENT_FILE: &str = "experiment.json";

/// `--config`, else `<data>/experiment.json`, else defaults; then `--seed`.
fn resolve(common: &Common, data: Option<&Path>) -> Result<ExperimentConfig> {
    let from_data = data.map(|d| d.join(EXPERIMENT_FILE)).filter(|p| p.is_file());
    let mut cfg = match common.config.as_deref().map(Path::to_path_buf).or(from_data) {
        Some(path) => ExperimentConfig::load(&path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

/// `x.tsv` → `x.long.tsv`; anything else gets `.long.tsv` appended.
fn long_path(out: &Path) -> PathBuf {
    match out.to_str().and_then(|s| s.strip_suffix(".tsv")) {
        Some(stem) => PathBuf::from(format!("{stem}.long.tsv")),
        None => with_suffix(out, ".long.tsv"),
    }
}

fn write_outputs(cfg: &ExperimentConfig, kind: &str, out: &Path, table: Option<String>, rows: &[Row]) -> Result<()> {
    let prov = provenance(cfg);
    if let Some(t) = table {
        write_file(out, &t)?;
    }
    let long = long_path(out);
    write_file(&long, &write_long(&prov, kind, rows))?;
    println!("wrote {} and {}", out.display(), long.display());
    Ok(())
}

pub fn generate(common: &Common, out: &Path, runs_per_class: Option<usize>) -> Result<()> {
    let mut cfg = resolve(common, None)?;
    if let Some(n) = runs_per_class {
        cfg.corpus.runs_per_class = n;
        cfg.validate()?;
    }
    let c = build_corpus(&cfg.corpus, cfg.seed)?;
    corpus::save(&c, out)?;
    cfg.save(&out.join(EXPERIMENT_FILE))?;
    println!("wrote {} windows ({} train, {} test) to {}", c.len(), c.train().len(), c.test().len(), out.display());
    Ok(())
}

pub fn train(common: &Common, arch: Arch, data: &Path, out: &Path, folds: Option<usize>) -> Result<()> {
    let cfg = resolve(common, Some(data))?;
    let c = corpus::load(data)?;
    let mut det = cfg.detector(arch)?;
    if let Some(k) = folds {
        det.folds = k;
    }
    let train_w = c.train();
    let (model, report) = detect::train(&det, &train_w)?;
    save_model(&model, out)?;
    println!("wrote {} ({} epochs, kept epoch {})", out.display(), report.epochs_run, model.final_epoch);
    if folds.is_some() {
        let cv = cross_validate(&det, &train_w)?;
        let mut t = format!("{}\nfold\taccuracy\tprecision\trecall\tf1\n", provenance(&cfg).header("cross_validation"));
        for (i, m) in cv.folds.iter().enumerate() {
            let _ = writeln!(t, "{i}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", m.accuracy, m.precision, m.recall, m.f1);
        }
        for (name, s) in [("mean", &cv.mean), ("std", &cv.std)] {
            let _ = writeln!(t, "{name}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", s.accuracy, s.precision, s.recall, s.f1);
        }
        let path = with_suffix(out, ".cv.tsv");
        write_file(&path, &t)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn eval(common: &Common, model: &Path, data: &Path, out: &Path) -> Result<()> {
    let cfg = resolve(common, Some(data))?;
    let model = load_model(model)?;
    let c = corpus::load(data)?;
    let m = evaluate(&model, &c.test())?;
    let rows = pipeline::metric_rows(model.arch(), "none", &m);
    write_outputs(&cfg, "eval", out, report::clean_metrics_table(&provenance(&cfg), &rows), &rows)
}

pub fn attack(common: &Common, model: &Path, kind: VariantKind, runs: Option<usize>, data: Option<&Path>, out: &Path) -> Result<()> {
    let mut cfg = resolve(common, data)?;
    if let Some(n) = runs {
        cfg.eval.attack_runs = n;
        cfg.validate()?;
    }
    let model = load_model(model)?;
    let ws = pipeline::attack_windows(&cfg, kind)?;
    let refs: Vec<&LabeledWindow> = ws.iter().collect();
    let rows = pipeline::asr_rows(&compute_asr(&model, &refs)?, "none");
    write_outputs(&cfg, "attack", out, report::asr_grid_table(&provenance(&cfg), &rows), &rows)
}

fn variant_list(cfg: &ExperimentConfig, requested: &[VariantKind]) -> Vec<VariantKind> {
    if requested.is_empty() {
        cfg.variants.iter().map(|v| v.kind).collect()
    } else {
        requested.to_vec()
    }
}

pub fn defend_adv(common: &Common, model: &Path, data: &Path, kinds: &[VariantKind], out: &Path) -> Result<()> {
    let cfg = resolve(common, Some(data))?;
    let base: DetectorModel = load_model(model)?;
    let c = corpus::load(data)?;
    let (defended, _) = adversarial_train(&base.config, &c.train(), &cfg.corpus, &variant_list(&cfg, kinds))?;
    save_model(&defended, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn defend_noise(common: &Common, model: &Path, data: &Path, kinds: &[VariantKind], runs: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = resolve(common, Some(data))?;
    if let Some(n) = runs {
        cfg.eval.attack_runs = n;
        cfg.validate()?;
    }
    let model = load_model(model)?;
    let c = corpus::load(data)?;
    let (train_w, test_w) = (c.train(), c.test());
    let mut rows = Vec::new();
    for kind in variant_list(&cfg, kinds) {
        let defense = pipeline::fit_variant_defense(&cfg, &train_w, kind)?;
        let ws = pipeline::attack_windows(&cfg, kind)?;
        let outcome = pipeline::noise_outcome(cfg.seed, &model, &defense, kind, &ws, &test_w)?;
        rows.extend(pipeline::noise_rows(&outcome));
        rows.extend(pipeline::band_rows(kind, &defense));
    }
    write_outputs(&cfg, "defend", out, report::defense_grid_table(&provenance(&cfg), &rows), &rows)
}

pub fn stats(common: &Common, data: Option<&Path>, runs: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = resolve(common, data)?;
    if let Some(n) = runs {
        cfg.eval.battery.runs = n;
        cfg.validate()?;
    }
    let b = run_battery(&cfg.corpus.devices, &cfg.corpus.scan, &cfg.variants, &cfg.eval.battery, cfg.seed)?;
    let rows = pipeline::battery_rows(&b);
    write_outputs(&cfg, "stats", out, report::battery_table(&provenance(&cfg), &rows), &rows)
}

pub fn explain(common: &Common, model: &Path, data: &Path, class: ClassLabel, windows: Option<usize>, out: &Path) -> Result<()> {
    let cfg = resolve(common, Some(data))?;
    let model = load_model(model)?;
    let c = corpus::load(data)?;
    let n = windows.unwrap_or(cfg.eval.explain_windows);
    let ws: Vec<&[f64]> = c.test().into_iter().filter(|w| w.label == class).take(n).map(|w| w.samples.as_slice()).collect();
    if ws.is_empty() {
        return Err(Error::Parameter(format!("no {class} windows in the test split of {}", data.display())));
    }
    let params = ShapleyParams { permutations: cfg.eval.shapley_permutations, group_size: cfg.eval.shapley_group_size, seed: cfg.seed };
    let importance = aggregate_importance(&model, &ws, class, &params)?;
    let agg = Attribution { values: importance.clone(), group_size: params.group_size, target_class: class, n_permutations: params.permutations };
    let overlay = overlay_points(&agg, cfg.eval.overlay_top_q)?;
    let rows = pipeline::explain_rows(model.arch(), class, &importance, params.group_size, None, &overlay);
    let table = report::explain_table(&provenance(&cfg), &rows, params.group_size);
    write_outputs(&cfg, "explain", out, table, &rows)
}

fn collect_tsv(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> =
        fs::read_dir(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_tsv(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "tsv") {
            out.push(p);
        }
    }
    Ok(())
}

fn is_long_format(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    Ok(text.lines().nth(1) == Some(LONG_COLUMNS))
}

pub fn report(input: &Path, out: &Path) -> Result<()> {
    let mut files = Vec::new();
    collect_tsv(input, &mut files)?;
    let mut provs = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for path in files {
        if !is_long_format(&path)? {
            continue;
        }
        let (prov, file_rows) = read_long(&path)?;
        provs.push(prov);
        for r in file_rows {
            let key = format!("{}\t{}\t{}\t{}\t{}", r.arch, r.variant, r.defense, r.metric, r.value);
            if seen.insert(key) {
                rows.push(r);
            }
        }
    }
    if provs.is_empty() {
        let source = std::io::Error::new(std::io::ErrorKind::NotFound, "no long-format result files found");
        return Err(Error::Io { path: input.into(), source });
    }
    let prov = merge_provenance(&provs);
    for (name, text) in report::build_tables(&prov, &rows) {
        write_file(&out.join(&name), &text)?;
    }
    println!("merged {} rows from {} files into {}", rows.len(), provs.len(), out.display());
    Ok(())
}

pub fn pipeline(common: &Common, out: &Path) -> Result<()> {
    let cfg = resolve(common, None)?;
    let res = pipeline::run_pipeline(&cfg, Some(out))?;
    for (stage, t) in &res.timings {
        eprintln!("{stage:>14}: {:.1} s", t.as_secs_f64());
    }
    println!("wrote pipeline outputs for seed {} to {}", cfg.seed, out.display());
    Ok(())
}
