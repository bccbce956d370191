mod common;

use common::{quick_model, toy_corpus};
use dummyscan::detect::Arch;
use dummyscan::explain::*;
use dummyscan::rng::stream;
use dummyscan::{ClassLabel, Error};
use proptest::prelude::*;
use rand::Rng;

fn group_sum(z: &[f64], g: usize, size: usize) -> f64 {
    z[g * size..(g + 1) * size].iter().sum()
}

/// Nonlinear three-group value function with an interaction term.
fn toy(z: &[f64]) -> dummyscan::Result<f64> {
    let (a, b, c) = (group_sum(z, 0, 2), group_sum(z, 1, 2), group_sum(z, 2, 2));
    Ok((a * b).tanh() + 0.5 * c * c + 0.3 * a * c)
}

#[test]
fn linear_model_is_exact_for_any_permutation_count() {
    let mut rng = stream(1, &[]);
    let w: Vec<f64> = (0..150).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..150).map(|_| rng.random_range(-2.0..2.0)).collect();
    let f = |z: &[f64]| Ok(0.7 + z.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
    for m in [1, 3, 17] {
        let v = shapley_with(f, &x, &[0.0; 150], m, 5, &mut rng).unwrap();
        for (g, value) in v.iter().enumerate() {
            let want: f64 = (g * 5..(g + 1) * 5).map(|t| w[t] * x[t]).sum();
            assert!((value - want).abs() < 1e-12, "group {g}");
        }
    }
}

#[test]
fn sampled_matches_exact_on_three_groups() {
    let x = [0.8, 0.4, -1.1, 0.3, 0.9, 0.6];
    let base = [0.0; 6];
    let exact = exact_shapley(toy, &x, &base, 2).unwrap();
    let sampled = shapley_with(toy, &x, &base, 5000, 2, &mut stream(2, &[])).unwrap();
    for (e, s) in exact.iter().zip(&sampled) {
        assert!((e - s).abs() < 0.02, "{exact:?} vs {sampled:?}");
    }
}

#[test]
fn exact_shapley_symmetry() {
    // Groups 0 and 1 enter symmetrically and carry equal values.
    let f = |z: &[f64]| {
        let (a, b, c) = (group_sum(z, 0, 1), group_sum(z, 1, 1), group_sum(z, 2, 1));
        Ok((a + b).powi(2) * c + a * b)
    };
    let v = exact_shapley(f, &[1.5, 1.5, -0.7], &[0.0; 3], 1).unwrap();
    assert!((v[0] - v[1]).abs() < 1e-12, "{v:?}");
}

#[test]
fn efficiency_holds_per_estimate() {
    let x = [0.8, 0.4, -1.1, 0.3, 0.9, 0.6];
    let base = [0.1, -0.2, 0.0, 0.3, 0.0, 0.5];
    let gap = toy(&x).unwrap() - toy(&base).unwrap();
    for (seed, m) in [(1, 1), (2, 7), (3, 64)] {
        let v = shapley_with(toy, &x, &base, m, 2, &mut stream(seed, &[])).unwrap();
        assert!((v.iter().sum::<f64>() - gap).abs() < 1e-9);
    }
    let v = exact_shapley(toy, &x, &base, 2).unwrap();
    assert!((v.iter().sum::<f64>() - gap).abs() < 1e-9);
}

#[test]
fn estimator_variance_shrinks_with_permutations() {
    let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let f = |z: &[f64]| {
        let s: Vec<f64> = (0..6).map(|g| group_sum(z, g, 2)).collect();
        Ok((s[0] * s[1]).tanh() + s[2] * s[3] * s[4] + (s[5] + s[0]).powi(2))
    };
    // Variance over 20 reseeded runs, pooled across groups.
    let variance = |m: usize| {
        let runs: Vec<Vec<f64>> =
            (0..20).map(|seed| shapley_with(f, &x, &[0.0; 12], m, 2, &mut stream(seed, &[m as u64])).unwrap()).collect();
        (0..6)
            .map(|g| {
                let mean = runs.iter().map(|r| r[g]).sum::<f64>() / 20.0;
                runs.iter().map(|r| (r[g] - mean).powi(2)).sum::<f64>() / 19.0
            })
            .sum::<f64>()
    };
    let (v64, v256) = (variance(64), variance(256));
    assert!(v64 > 0.0);
    assert!(v256 < 0.5 * v64, "{v256} vs {v64}");
}

#[test]
fn group_size_must_divide_window() {
    let err = shapley_with(toy, &[0.0; 6], &[0.0; 6], 4, 4, &mut stream(0, &[])).unwrap_err();
    assert!(matches!(err, Error::Parameter(_)));
    let model = quick_model(Arch::Lstm, 1);
    let err = sampled_shapley(&model, &[0.0; 150], ClassLabel::Mirai, None, 4, 7, &mut stream(0, &[])).unwrap_err();
    assert!(matches!(err, Error::Parameter(_)));
    assert!(exact_shapley(toy, &[0.0; 150], &[0.0; 150], 5).is_err());
}

#[test]
fn model_attribution_shape_and_table() {
    let model = quick_model(Arch::Tcn, 2);
    let data = toy_corpus(9, 1);
    let params = ShapleyParams { permutations: 4, group_size: 5, seed: 3 };
    let a = explain_window(&model, &data[2].samples, ClassLabel::Mirai, &params).unwrap();
    assert_eq!(a.groups(), 30);
    assert!(a.values.iter().all(|v| v.is_finite()));
    let table = a.to_table();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 31);
    assert!(lines[1].starts_with("0\t0\t5\tmirai\t"));
    assert!(lines[30].starts_with("29\t145\t150\tmirai\t"));
}

#[test]
fn aggregate_importance_rules() {
    let model = quick_model(Arch::AeMlp, 3);
    let data = toy_corpus(10, 2);
    let params = ShapleyParams { permutations: 3, group_size: 10, seed: 4 };
    let w = data[4].samples.as_slice();
    let single = aggregate_importance(&model, &[w], ClassLabel::Mirai, &params).unwrap();
    let a = explain_window(&model, w, ClassLabel::Mirai, &params).unwrap();
    assert_eq!(single, a.values.iter().map(|v| v.abs()).collect::<Vec<_>>());

    let two = [data[4].samples.as_slice(), data[5].samples.as_slice()];
    let doubled = [two[0], two[1], two[0], two[1]];
    let x = aggregate_importance(&model, &two, ClassLabel::Mirai, &params).unwrap();
    let y = aggregate_importance(&model, &doubled, ClassLabel::Mirai, &params).unwrap();
    for (p, q) in x.iter().zip(&y) {
        assert!((p - q).abs() < 1e-15);
    }
    assert!(matches!(aggregate_importance(&model, &[], ClassLabel::Mirai, &params), Err(Error::Parameter(_))));
}

fn attribution(values: Vec<f64>) -> Attribution {
    let group_size = 150 / values.len();
    Attribution { values, group_size, target_class: ClassLabel::Mirai, n_permutations: 1 }
}

#[test]
fn overlay_rules() {
    let a = attribution((0..30).map(|g| 29.0 - g as f64 * 0.5).collect());
    assert_eq!(overlay_points(&a, 1.0).unwrap(), (0..150).collect::<Vec<_>>());
    assert_eq!(overlay_points(&a, 1e-9).unwrap(), (0..5).collect::<Vec<_>>());
    let uniform = attribution(vec![0.25; 30]);
    assert_eq!(overlay_points(&uniform, 0.5).unwrap(), (0..75).collect::<Vec<_>>());
    assert!(overlay_points(&a, 0.0).is_err());
    assert!(overlay_points(&a, 1.5).is_err());
    assert_eq!(uniform.top_group(), 0);
}

#[test]
fn spike_windows_are_fresh_unmodified_mirai() {
    let cfg = dummyscan::corpus::CorpusConfig::desk();
    let runs = spike_windows(&cfg, 6, 42).unwrap();
    assert_eq!(runs.len(), 6);
    for r in &runs {
        assert_eq!(r.samples.len(), 150);
        assert!(!r.spike_indices().is_empty());
        assert!(r.perturb_mask.iter().all(|&b| b == 0));
    }
    assert_eq!(runs, spike_windows(&cfg, 6, 42).unwrap());
}

#[test]
fn explain_runs_reports_efficiency() {
    let model = quick_model(Arch::Lstm, 5);
    let runs = spike_windows(&dummyscan::corpus::CorpusConfig::desk(), 3, 1).unwrap();
    let params = ShapleyParams { permutations: 2, group_size: 5, seed: 1 };
    let (attrs, overlap) = explain_runs(&model, &runs, &params).unwrap();
    assert_eq!(attrs.len(), 3);
    assert_eq!(overlap.windows, 3);
    assert!(overlap.hits <= 3);
    assert!(overlap.max_efficiency_gap < 1e-9);
    assert!(explain_runs(&model, &[], &params).is_err());
}

proptest! {
    #[test]
    fn overlay_selects_ceiling_of_groups(values in prop::collection::vec(-5.0..5.0f64, 30), q in 0.001..1.0f64) {
        let a = attribution(values);
        let idx = overlay_points(&a, q).unwrap();
        let k = ((q * 30.0).ceil() as usize).clamp(1, 30);
        prop_assert_eq!(idx.len(), 5 * k);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.contains(&(a.top_group() * 5)));
    }

    #[test]
    fn efficiency_on_random_inputs(x in prop::collection::vec(-2.0..2.0f64, 6), m in 1usize..20, seed in 0u64..1000) {
        let v = shapley_with(toy, &x, &[0.0; 6], m, 2, &mut stream(seed, &[])).unwrap();
        let gap = toy(&x).unwrap() - toy(&[0.0; 6]).unwrap();
        prop_assert!((v.iter().sum::<f64>() - gap).abs() < 1e-9);
    }
}
