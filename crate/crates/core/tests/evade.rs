mod common;

use std::f64::consts::PI;

use common::{constant_model, quick_model, toy_corpus};
use dummyscan::corpus::{perturbed_windows, CorpusConfig, LabeledWindow};
use dummyscan::detect::{confusion, Arch};
use dummyscan::evade::*;
use dummyscan::rng::stream;
use dummyscan::{ClassLabel, Error, PerturbationSpec, VariantKind};
use proptest::prelude::*;

fn mirai_windows(kind: VariantKind, n: usize) -> Vec<LabeledWindow> {
    perturbed_windows(&CorpusConfig::desk(), &PerturbationSpec::default_for(kind), n, 9, 77).unwrap()
}

fn clean_windows(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..150).map(|t| ((t * (i + 3)) as f64 * 0.05).sin() * 10.0 + 100.0).collect()).collect()
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|w| w.as_slice()).collect()
}

#[test]
fn asr_of_constant_models() {
    let ws = mirai_windows(VariantKind::OneForLoop, 12);
    let r: Vec<&LabeledWindow> = ws.iter().collect();
    let m = compute_asr(&constant_model(ClassLabel::Mirai), &r).unwrap();
    assert_eq!((m.asr, m.evaded()), (0.0, 0));
    let idle = compute_asr(&constant_model(ClassLabel::Idle), &r).unwrap();
    assert_eq!((idle.asr, idle.to_idle, idle.to_iot), (1.0, 12, 0));
    let iot = compute_asr(&constant_model(ClassLabel::IoTService), &r).unwrap();
    assert_eq!((iot.asr, iot.to_idle, iot.to_iot), (1.0, 0, 12));
    assert_eq!(iot.variant, VariantKind::OneForLoop);
}

#[test]
fn asr_on_clean_mirai_matches_confusion() {
    let model = quick_model(Arch::Tcn, 4);
    let data = toy_corpus(11, 10);
    let mirai: Vec<&LabeledWindow> = data.iter().filter(|w| w.label == ClassLabel::Mirai).collect();
    let e = compute_asr(&model, &mirai).unwrap();
    let c = confusion(&model, &mirai).unwrap();
    let m = ClassLabel::Mirai.index();
    assert_eq!(e.to_idle, c[m][ClassLabel::Idle.index()]);
    assert_eq!(e.to_iot, c[m][ClassLabel::IoTService.index()]);
    assert_eq!(e.n_windows - e.evaded(), c[m][m]);
}

#[test]
fn asr_input_errors() {
    let model = constant_model(ClassLabel::Idle);
    assert!(matches!(compute_asr(&model, &[]), Err(Error::Parameter(_))));
    let data = toy_corpus(1, 1);
    let mixed: Vec<&LabeledWindow> = data.iter().collect();
    assert!(matches!(compute_asr(&model, &mixed), Err(Error::Parameter(_))));
    let a = mirai_windows(VariantKind::SingleFunction, 1);
    let b = mirai_windows(VariantKind::IfStatement, 1);
    assert!(matches!(compute_asr(&model, &[&a[0], &b[0]]), Err(Error::Parameter(_))));
}

#[test]
fn single_tone_selects_its_bin() {
    let clean = clean_windows(6);
    let perturbed: Vec<Vec<f64>> =
        clean.iter().map(|w| w.iter().enumerate().map(|(t, v)| v + 50.0 * (2.0 * PI * 12.0 * t as f64 / 150.0).sin()).collect()).collect();
    let d = fit_noise_defense(&refs(&clean), &refs(&perturbed), 0.01, 0.1).unwrap();
    assert_eq!(d.band_indices, vec![12]);
    let all = fit_noise_defense(&refs(&clean), &refs(&perturbed), 1.0, 0.1).unwrap();
    assert_eq!(all.band_indices, (0..N_BINS).collect::<Vec<_>>());
}

#[test]
fn identical_sets_fall_back_to_lowest_bins() {
    let clean = clean_windows(4);
    let d = fit_noise_defense(&refs(&clean), &refs(&clean), 0.1, 0.1).unwrap();
    assert_eq!(d.band_indices, (0..8).collect::<Vec<_>>());
}

#[test]
fn fit_errors() {
    let clean = clean_windows(2);
    assert!(matches!(fit_noise_defense(&[], &refs(&clean), 0.1, 0.1), Err(Error::Parameter(_))));
    assert!(matches!(fit_noise_defense(&refs(&clean), &refs(&clean), 0.0, 0.1), Err(Error::Parameter(_))));
    assert!(matches!(fit_noise_defense(&refs(&clean), &refs(&clean), 0.1, -1.0), Err(Error::Parameter(_))));
    let short = [vec![0.0; 149]];
    assert!(fit_noise_defense(&refs(&short), &refs(&clean), 0.1, 0.1).is_err());
}

#[test]
fn zero_sigma_is_bit_identical() {
    let model = quick_model(Arch::Lstm, 6);
    let clean = clean_windows(3);
    let d = fit_noise_defense(&refs(&clean), &refs(&clean_windows(5)), 0.1, 0.0).unwrap();
    let mut rng = stream(1, &[]);
    for w in &clean {
        assert_eq!(defend_predict(&model, &d, w, &mut rng).unwrap(), model.predict(w).unwrap());
    }
    assert!(matches!(defend_predict(&model, &d, &[0.0; 10], &mut rng), Err(Error::Shape(_))));
}

#[test]
fn noise_is_real_zero_mean_and_band_limited() {
    let clean = clean_windows(5);
    let perturbed: Vec<Vec<f64>> = clean.iter().map(|w| w.iter().enumerate().map(|(t, v)| v + (t as f64 * 1.3).cos() * 40.0).collect()).collect();
    let d = fit_noise_defense(&refs(&clean), &refs(&perturbed), 0.1, 1.0).unwrap();
    assert!(!d.band_indices.contains(&0));
    let mut rng = stream(2, &[]);
    for _ in 0..20 {
        let n = d.sample_noise(&mut rng);
        assert_eq!(n.len(), 150);
        assert!(n.iter().all(|v| v.is_finite()));
        assert!((n.iter().sum::<f64>() / 150.0).abs() < 1e-9);
        let mag = magnitude_spectrum(&n).unwrap();
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        for (k, m) in mag.iter().enumerate() {
            if !d.band_indices.contains(&k) {
                assert!(*m < 1e-9 * peak.max(1.0), "bin {k} carries {m}");
            }
        }
    }
}

#[test]
fn augmentation_counts_and_errors() {
    let cfg = CorpusConfig::desk();
    let data = toy_corpus(3, 7);
    let train: Vec<&LabeledWindow> = data.iter().collect();
    assert!(matches!(augmentation_windows(&train, &cfg, &[], 1), Err(Error::Parameter(_))));
    assert!(augmentation_windows(&train, &cfg, &[VariantKind::None], 1).unwrap().is_empty());
    let kinds = [VariantKind::IfStatement, VariantKind::SingleFunction, VariantKind::None];
    let extra = augmentation_windows(&train, &cfg, &kinds, 1).unwrap();
    assert_eq!(extra.len(), 7);
    let sf = extra.iter().filter(|w| w.variant == VariantKind::SingleFunction).count();
    assert_eq!(sf, 4);
    assert!(extra.iter().all(|w| w.label == ClassLabel::Mirai));
    assert_eq!(extra, augmentation_windows(&train, &cfg, &kinds, 1).unwrap());
}

proptest! {
    #[test]
    fn asr_is_a_fraction(class in 0usize..3, n in 1usize..6) {
        let ws = mirai_windows(VariantKind::TwoNestedLoops, n);
        let r: Vec<&LabeledWindow> = ws.iter().collect();
        let e = compute_asr(&constant_model(ClassLabel::ALL[class]), &r).unwrap();
        prop_assert!((0.0..=1.0).contains(&e.asr));
        prop_assert_eq!(e.evaded() as f64, e.asr * n as f64);
    }

    #[test]
    fn band_size_follows_fraction(f in 0.001..1.0f64) {
        let clean = clean_windows(3);
        let d = fit_noise_defense(&refs(&clean), &refs(&clean_windows(4)), f, 0.1).unwrap();
        prop_assert_eq!(d.band_indices.len(), ((f * N_BINS as f64).ceil() as usize).clamp(1, N_BINS));
        prop_assert!(d.band_indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(d.band_indices.iter().all(|&k| k < N_BINS));
    }
}
