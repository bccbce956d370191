//! Long-format result rows and the tables built from them.
//!
//! Every file starts with a provenance line
//! `# dummyscan <kind> seed=<S> config_sha256=<hex>` followed by a column
//! header. Long-format files have the columns arch, variant, defense,
//! metric, value; "-" marks a column that does not apply.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::digest_of;

pub const LONG_COLUMNS: &str = "arch\tvariant\tdefense\tmetric\tvalue";
pub const NA: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub digest: String,
}

impl Provenance {
    pub fn header(&self, kind: &str) -> String {
        format!("# dummyscan {kind} seed={} config_sha256={}", self.seed, self.digest)
    }

    /// Parse a provenance line; returns the kind as well.
    pub fn parse(line: &str, path: &Path) -> Result<(String, Provenance)> {
        let bad = || Error::format(path, 1, format!("expected '# dummyscan <kind> seed=<S> config_sha256=<hex>', got '{line}'"));
        let mut parts = line.split_whitespace();
        if parts.next() != Some("#") || parts.next() != Some("dummyscan") {
            return Err(bad());
        }
        let kind = parts.next().ok_or_else(bad)?.to_string();
        let seed = parts.next().and_then(|s| s.strip_prefix("seed=")).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let digest = parts.next().and_then(|s| s.strip_prefix("config_sha256=")).ok_or_else(bad)?.to_string();
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok((kind, Provenance { seed, digest }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub arch: String,
    pub variant: String,
    pub defense: String,
    pub metric: String,
    pub value: f64,
}

impl Row {
    pub fn new(arch: impl ToString, variant: impl ToString, defense: impl ToString, metric: impl ToString, value: f64) -> Row {
        Row {
            arch: arch.to_string(),
            variant: variant.to_string(),
            defense: defense.to_string(),
            metric: metric.to_string(),
            value,
        }
    }
}

pub fn write_long(prov: &Provenance, kind: &str, rows: &[Row]) -> String {
    let mut out = format!("{}\n{LONG_COLUMNS}\n", prov.header(kind));
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.arch, r.variant, r.defense, r.metric, r.value);
    }
    out
}

pub fn parse_long(text: &str, path: &Path) -> Result<(Provenance, Vec<Row>)> {
    let mut lines = text.lines();
    let (_, prov) = Provenance::parse(lines.next().unwrap_or(""), path)?;
    if lines.next() != Some(LONG_COLUMNS) {
        return Err(Error::format(path, 2, format!("expected column header '{LONG_COLUMNS}'")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::format(path, i + 3, format!("expected 5 tab-separated fields, got {}", f.len())));
        }
        let value = f[4].parse().map_err(|_| Error::format(path, i + 3, format!("bad value '{}'", f[4])))?;
        rows.push(Row::new(f[0], f[1], f[2], f[3], value));
    }
    Ok((prov, rows))
}

pub fn read_long(path: &Path) -> Result<(Provenance, Vec<Row>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_long(&text, path)
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Provenance of a merged set: the common seed (0 if they differ) and the
/// digest of the sorted, deduplicated input digests.
pub fn merge_provenance(provs: &[Provenance]) -> Provenance {
    let seed = match provs.first() {
        Some(p) if provs.iter().all(|q| q.seed == p.seed) => p.seed,
        _ => 0,
    };
    let mut digests: Vec<&str> = provs.iter().map(|p| p.digest.as_str()).collect();
    digests.sort_unstable();
    digests.dedup();
    let digest = if digests.len() == 1 { digests[0].to_string() } else { digest_of(&digests.join("\n")) };
    Provenance { seed, digest }
}

fn first_seen<'a>(rows: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.iter().any(|o| o == r) {
            out.push(r.to_string());
        }
    }
    out
}

fn lookup<'a>(rows: &'a [Row], arch: &str, variant: &str, defense: &str, metric: &str) -> Option<&'a Row> {
    rows.iter().rev().find(|r| r.arch == arch && r.variant == variant && r.defense == defense && r.metric == metric)
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{v:.decimals$}"))
}

pub const METRIC_COLUMNS: [&str; 4] = ["accuracy", "precision", "recall", "f1"];

/// Clean test metrics, one row per architecture.
pub fn clean_metrics_table(prov: &Provenance, rows: &[Row]) -> Option<String> {
    let rel: Vec<&Row> = rows.iter().filter(|r| r.variant == "none" && r.defense == "none" && r.metric == "accuracy").collect();
    if rel.is_empty() {
        return None;
    }
    let mut out = format!("{}\narch\t{}\n", prov.header("clean_metrics"), METRIC_COLUMNS.join("\t"));
    for arch in first_seen(rel.iter().map(|r| r.arch.as_str())) {
        let cells: Vec<String> =
            METRIC_COLUMNS.iter().map(|m| cell(lookup(rows, &arch, "none", "none", m).map(|r| r.value), 4)).collect();
        let _ = writeln!(out, "{arch}\t{}", cells.join("\t"));
    }
    Some(out)
}

fn asr_axes(rows: &[Row], defenses: &[&str]) -> (Vec<String>, Vec<String>) {
    let rel = || rows.iter().filter(|r| r.metric == "asr" && defenses.contains(&r.defense.as_str()));
    (first_seen(rel().map(|r| r.variant.as_str())), first_seen(rel().map(|r| r.arch.as_str())))
}

/// Undefended ASR, variants × architectures.
pub fn asr_grid_table(prov: &Provenance, rows: &[Row]) -> Option<String> {
    let (variants, archs) = asr_axes(rows, &["none"]);
    if variants.is_empty() {
        return None;
    }
    let mut out = format!("{}\nvariant\t{}\n", prov.header("asr_grid"), archs.join("\t"));
    for v in &variants {
        let cells: Vec<String> = archs.iter().map(|a| cell(lookup(rows, a, v, "none", "asr").map(|r| r.value), 3)).collect();
        let _ = writeln!(out, "{v}\t{}", cells.join("\t"));
    }
    Some(out)
}

/// Defended ASR, each cell "adv_train / noise_inject".
pub fn defense_grid_table(prov: &Provenance, rows: &[Row]) -> Option<String> {
    let (variants, archs) = asr_axes(rows, &["adv_train", "noise_inject"]);
    if variants.is_empty() {
        return None;
    }
    let mut out = format!("{}\nvariant\t{}\n", prov.header("defense_grid"), archs.join("\t"));
    for v in &variants {
        let cells: Vec<String> = archs
            .iter()
            .map(|a| {
                let adv = cell(lookup(rows, a, v, "adv_train", "asr").map(|r| r.value), 3);
                let noise = cell(lookup(rows, a, v, "noise_inject", "asr").map(|r| r.value), 3);
                format!("{adv} / {noise}")
            })
            .collect();
        let _ = writeln!(out, "{v}\t{}", cells.join("\t"));
    }
    Some(out)
}

/// Perturbation statistics, one row per variant.
pub fn battery_table(prov: &Provenance, rows: &[Row]) -> Option<String> {
    let rel: Vec<&Row> = rows.iter().filter(|r| r.defense == "battery").collect();
    if rel.is_empty() {
        return None;
    }
    let metrics = first_seen(rel.iter().map(|r| r.metric.as_str()));
    let mut out = format!("{}\nvariant\t{}\n", prov.header("battery"), metrics.join("\t"));
    for v in first_seen(rel.iter().map(|r| r.variant.as_str())) {
        let cells: Vec<String> = metrics
            .iter()
            .map(|m| match lookup(rows, NA, &v, "battery", m) {
                Some(r) if m.ends_with("_p") => format!("{:.3e}", r.value),
                Some(r) => format!("{:.4}", r.value),
                None => NA.to_string(),
            })
            .collect();
        let _ = writeln!(out, "{v}\t{}", cells.join("\t"));
    }
    Some(out)
}

/// Aggregate attribution per architecture and group. Explain rows carry the
/// target class in the variant column.
pub fn explain_table(prov: &Provenance, rows: &[Row], group_size: usize) -> Option<String> {
    let rel: Vec<&Row> = rows.iter().filter(|r| r.defense == "explain" && r.metric.starts_with("importance_g")).collect();
    if rel.is_empty() {
        return None;
    }
    let mut out = format!("{}\narch\tclass\tgroup_index\tstart_t\tend_t\tmean_abs_shapley\n", prov.header("explain"));
    for r in rel {
        let g: usize = r.metric.trim_start_matches("importance_g").parse().unwrap_or(0);
        let _ = writeln!(out, "{}\t{}\t{g}\t{}\t{}\t{:e}", r.arch, r.variant, g * group_size, (g + 1) * group_size, r.value);
    }
    Some(out)
}

/// Group size recorded in explain rows, if any.
pub fn recorded_group_size(rows: &[Row]) -> Option<usize> {
    rows.iter().find(|r| r.defense == "explain" && r.metric == "group_size").map(|r| r.value as usize)
}

/// All tables that `rows` support, keyed by file name, plus the merged
/// long-format file. Missing sections are listed in the long file header.
pub fn build_tables(prov: &Provenance, rows: &[Row]) -> BTreeMap<String, String> {
    let group_size = recorded_group_size(rows).unwrap_or(crate::explain::DEFAULT_GROUP_SIZE);
    let mut files = BTreeMap::new();
    let sections: [(&str, Option<String>); 5] = [
        ("clean_metrics.tsv", clean_metrics_table(prov, rows)),
        ("asr_grid.tsv", asr_grid_table(prov, rows)),
        ("defense_grid.tsv", defense_grid_table(prov, rows)),
        ("battery.tsv", battery_table(prov, rows)),
        ("explain.tsv", explain_table(prov, rows, group_size)),
    ];
    let mut omitted = Vec::new();
    for (name, table) in sections {
        match table {
            Some(t) => {
                files.insert(name.to_string(), t);
            }
            None => omitted.push(name.trim_end_matches(".tsv")),
        }
    }
    let kind = if omitted.is_empty() { "results".to_string() } else { format!("results(omitted:{})", omitted.join(",")) };
    files.insert("results_long.tsv".to_string(), write_long(prov, &kind, rows));
    files
}
