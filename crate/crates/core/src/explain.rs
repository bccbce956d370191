//! Sampled Shapley attribution over groups of consecutive time steps.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusConfig, WINDOW_LEN};
use crate::detect::DetectorModel;
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::tracegen::{synth_mirai, ClassLabel, PerturbationSpec, PowerRun};

pub const DEFAULT_GROUP_SIZE: usize = 5;
pub const DEFAULT_PERMUTATIONS: usize = 64;
/// Largest group count for which [`exact_shapley`] enumerates all orderings.
pub const MAX_EXACT_GROUPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapleyParams {
    pub permutations: usize,
    pub group_size: usize,
    pub seed: u64,
}

impl Default for ShapleyParams {
    fn default() -> Self {
        ShapleyParams { permutations: DEFAULT_PERMUTATIONS, group_size: DEFAULT_GROUP_SIZE, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub group_size: usize,
    pub target_class: ClassLabel,
    pub n_permutations: usize,
}

impl Attribution {
    pub fn groups(&self) -> usize {
        self.values.len()
    }

    /// Group with the largest |value|; ties go to the lower index.
    pub fn top_group(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        best
    }

    /// Tab-separated rows: group_index, start_t, end_t (exclusive), class, value, abs_value.
    pub fn to_table(&self) -> String {
        let mut out = String::from("group_index\tstart_t\tend_t\tclass\tvalue\tabs_value\n");
        for (i, v) in self.values.iter().enumerate() {
            let start = i * self.group_size;
            let _ = writeln!(out, "{i}\t{start}\t{}\t{}\t{v:e}\t{:e}", start + self.group_size, self.target_class, v.abs());
        }
        out
    }
}

fn check_groups(len: usize, group_size: usize) -> Result<usize> {
    if group_size == 0 || len % group_size != 0 {
        return Err(Error::param(format!("group_size {group_size} does not divide window length {len}")));
    }
    Ok(len / group_size)
}

fn set_group(z: &mut [f64], src: &[f64], g: usize, size: usize) {
    z[g * size..(g + 1) * size].copy_from_slice(&src[g * size..(g + 1) * size]);
}

/// Marginal contributions along one ordering, added into `acc`.
fn walk<F>(f: &mut F, x: &[f64], baseline: &[f64], f_base: f64, order: &[usize], size: usize, acc: &mut [f64]) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut z = baseline.to_vec();
    let mut prev = f_base;
    for &g in order {
        set_group(&mut z, x, g, size);
        let cur = f(&z)?;
        acc[g] += cur - prev;
        prev = cur;
    }
    Ok(())
}

/// Monte-Carlo Shapley values of the groups of `x` for the value function `f`,
/// with absent groups taken from `baseline`. Every ordering telescopes to
/// f(x) − f(baseline), so the values sum to that difference.
pub fn shapley_with<F>(
    mut f: F,
    x: &[f64],
    baseline: &[f64],
    permutations: usize,
    group_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x.len() != baseline.len() {
        return Err(Error::Shape(format!("baseline has {} values, window has {}", baseline.len(), x.len())));
    }
    if permutations == 0 {
        return Err(Error::param("at least one permutation is required"));
    }
    let g = check_groups(x.len(), group_size)?;
    let f_base = f(baseline)?;
    let mut acc = vec![0.0; g];
    let mut order: Vec<usize> = (0..g).collect();
    for _ in 0..permutations {
        order.shuffle(rng);
        walk(&mut f, x, baseline, f_base, &order, group_size, &mut acc)?;
    }
    Ok(acc.into_iter().map(|a| a / permutations as f64).collect())
}

/// Exact Shapley values by enumerating all g! orderings (g ≤ [`MAX_EXACT_GROUPS`]).
pub fn exact_shapley<F>(mut f: F, x: &[f64], baseline: &[f64], group_size: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if x.len() != baseline.len() {
        return Err(Error::Shape(format!("baseline has {} values, window has {}", baseline.len(), x.len())));
    }
    let g = check_groups(x.len(), group_size)?;
    if g > MAX_EXACT_GROUPS {
        return Err(Error::param(format!("exact enumeration limited to {MAX_EXACT_GROUPS} groups, got {g}")));
    }
    let f_base = f(baseline)?;
    let mut acc = vec![0.0; g];
    let mut order: Vec<usize> = (0..g).collect();
    // Heap's algorithm.
    let mut c = vec![0usize; g];
    let mut count = 1usize;
    walk(&mut f, x, baseline, f_base, &order, group_size, &mut acc)?;
    let mut i = 0;
    while i < g {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            walk(&mut f, x, baseline, f_base, &order, group_size, &mut acc)?;
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(acc.into_iter().map(|a| a / count as f64).collect())
}

/// Attribution of the model's `target` probability for a raw window. The
/// baseline is given in standardized space; `None` means all zeros (the
/// training mean).
pub fn sampled_shapley(
    model: &DetectorModel,
    window: &[f64],
    target: ClassLabel,
    baseline: Option<&[f64]>,
    permutations: usize,
    group_size: usize,
    rng: &mut impl Rng,
) -> Result<Attribution> {
    let x = model.scaler.apply(window)?;
    let zeros = vec![0.0; x.len()];
    let base = baseline.unwrap_or(&zeros);
    let values = shapley_with(|z| Ok(model.forward(z)?.prob(target)), &x, base, permutations, group_size, rng)?;
    Ok(Attribution { values, group_size, target_class: target, n_permutations: permutations })
}

/// Attribution with every window drawn from the same stream (seed, EXPLAIN),
/// so identical windows get identical attributions.
pub fn explain_window(model: &DetectorModel, window: &[f64], target: ClassLabel, params: &ShapleyParams) -> Result<Attribution> {
    let mut rng = stream(params.seed, &[domain::EXPLAIN]);
    sampled_shapley(model, window, target, None, params.permutations, params.group_size, &mut rng)
}

/// Mean |Shapley value| per group over `windows`.
pub fn aggregate_importance(
    model: &DetectorModel,
    windows: &[&[f64]],
    target: ClassLabel,
    params: &ShapleyParams,
) -> Result<Vec<f64>> {
    if windows.is_empty() {
        return Err(Error::param("importance aggregation needs at least one window"));
    }
    let all = windows.iter().map(|w| explain_window(model, w, target, params)).collect::<Result<Vec<_>>>()?;
    mean_abs(&all)
}

/// Time indices of the ⌈top_q · g⌉ groups with the largest |value|, ties to
/// the lower group index, in ascending order.
pub fn overlay_points(attribution: &Attribution, top_q: f64) -> Result<Vec<usize>> {
    if !(top_q > 0.0 && top_q <= 1.0) {
        return Err(Error::param(format!("top_q must lie in (0, 1], got {top_q}")));
    }
    let g = attribution.groups();
    let k = ((top_q * g as f64).ceil() as usize).clamp(1, g);
    let v = &attribution.values;
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let mut idx: Vec<usize> =
        order[..k].iter().flat_map(|&gi| gi * attribution.group_size..(gi + 1) * attribution.group_size).collect();
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeOverlap {
    pub windows: usize,
    pub hits: usize,
    pub rate: f64,
    /// Largest |Σ values − (f(x) − f(baseline))| seen.
    pub max_efficiency_gap: f64,
}

/// Fresh unmodified Mirai windows with ground-truth spikes, one per run,
/// devices cycling, drawn from (seed, EXPLAIN, 1, r).
pub fn spike_windows(config: &CorpusConfig, n: usize, seed: u64) -> Result<Vec<PowerRun>> {
    config.validate()?;
    (0..n)
        .map(|r| {
            let mut rng = stream(seed, &[domain::EXPLAIN, 1, r as u64]);
            let profile = &config.devices[r % config.devices.len()];
            synth_mirai(profile, WINDOW_LEN, &config.scan, &PerturbationSpec::none(), &mut rng)
        })
        .collect()
}

/// Mean |value| per group.
pub fn mean_abs(attributions: &[Attribution]) -> Result<Vec<f64>> {
    let first = attributions.first().ok_or_else(|| Error::param("no attributions to aggregate"))?;
    let mut acc = vec![0.0; first.groups()];
    for a in attributions {
        if a.groups() != acc.len() {
            return Err(Error::Shape("attributions differ in group count".into()));
        }
        acc.iter_mut().zip(&a.values).for_each(|(s, v)| *s += v.abs());
    }
    Ok(acc.into_iter().map(|s| s / attributions.len() as f64).collect())
}

/// Mirai attributions of `runs` and how often the top group covers a
/// ground-truth spike sample.
pub fn explain_runs(model: &DetectorModel, runs: &[PowerRun], params: &ShapleyParams) -> Result<(Vec<Attribution>, SpikeOverlap)> {
    if runs.is_empty() {
        return Err(Error::param("spike overlap needs at least one run"));
    }
    let f_b = model.forward(&vec![0.0; model.window_len()])?.prob(ClassLabel::Mirai);
    let mut hits = 0;
    let mut gap: f64 = 0.0;
    let mut out = Vec::with_capacity(runs.len());
    for run in runs {
        let a = explain_window(model, &run.samples, ClassLabel::Mirai, params)?;
        let f_x = model.predict(&run.samples)?.prob(ClassLabel::Mirai);
        gap = gap.max((a.values.iter().sum::<f64>() - (f_x - f_b)).abs());
        let top = a.top_group();
        let span = top * a.group_size..(top + 1) * a.group_size;
        if run.spike_indices().iter().any(|t| span.contains(t)) {
            hits += 1;
        }
        out.push(a);
    }
    let overlap = SpikeOverlap { windows: runs.len(), hits, rate: hits as f64 / runs.len() as f64, max_efficiency_gap: gap };
    Ok((out, overlap))
}

pub fn spike_overlap(model: &DetectorModel, runs: &[PowerRun], params: &ShapleyParams) -> Result<SpikeOverlap> {
    Ok(explain_runs(model, runs, params)?.1)
}
