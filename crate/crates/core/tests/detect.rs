mod common;

use common::toy_corpus;
use dummyscan::corpus::LabeledWindow;
use dummyscan::detect::*;
use dummyscan::rng::stream;
use dummyscan::ClassLabel;
use rand::Rng;

#[test]
fn gradient_check_every_arch() {
    for arch in Arch::ALL {
        let err = gradient_check_arch(&tiny_config(arch), 8, 42).unwrap();
        assert!(err < 1e-4, "{arch}: relative error {err:e}");
    }
}

// At h = 1e-5 the difference quotient carries ~1e-11 of round-off, which
// dominates the relative error of gradients near 1e-8; h = 1e-4 keeps both
// round-off and truncation well below the tolerance.
#[test]
fn gradient_check_across_seeds() {
    for arch in Arch::ALL {
        for seed in 0..12 {
            let (net, x, label) = gradient_check_case(&tiny_config(arch), 8, seed).unwrap();
            let err = gradient_check_with_step(&net, &x, label, 1e-4);
            assert!(err < 1e-4, "{arch} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn gradient_check_linear_is_exact() {
    let mut rng = stream(5, &[]);
    let net = Net::linear(12, &mut rng);
    let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    for label in 0..3 {
        let err = gradient_check(&net, &x, label);
        assert!(err < 1e-7, "linear: {err:e}");
    }
}

#[test]
fn gradient_check_rejects_large_nets() {
    let config = DetectorConfig::new(Arch::Lstm, 0);
    assert!(gradient_check_arch(&config, 8, 0).is_err());
}

#[test]
fn toy_corpus_is_learned_by_every_arch() {
    let data = toy_corpus(1, 20);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    for arch in Arch::ALL {
        let config = DetectorConfig::new(arch, 3);
        let (model, report) = train(&config, &refs).unwrap();
        let m = evaluate(&model, &refs).unwrap();
        assert!(m.accuracy >= 0.95, "{arch}: accuracy {}", m.accuracy);
        assert!(report.epochs_run <= 50);
        if report.train_loss.len() > 5 {
            assert!(report.train_loss[5] < report.train_loss[0], "{arch}: {:?}", report.train_loss);
        }
    }
}

#[test]
fn training_is_deterministic() {
    let data = toy_corpus(2, 8);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let config = DetectorConfig { max_epochs: 3, patience: 1, ..tiny_config(Arch::Tcn) };
    let (a, ra) = train(&config, &refs).unwrap();
    let (b, rb) = train(&config, &refs).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn training_requires_all_classes() {
    let data: Vec<LabeledWindow> = toy_corpus(3, 4).into_iter().filter(|w| w.label != ClassLabel::Mirai).collect();
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let err = train(&DetectorConfig::new(Arch::Lstm, 0), &refs).unwrap_err();
    assert!(matches!(err, dummyscan::Error::Training(_)), "{err}");
}

#[test]
fn zero_weights_give_uniform_probabilities() {
    let data = toy_corpus(4, 4);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let config = DetectorConfig { max_epochs: 2, patience: 1, ..tiny_config(Arch::Lstm) };
    let (mut model, _) = train(&config, &refs).unwrap();
    for t in model.net.params_mut() {
        t.fill(0.0);
    }
    let p = model.forward(&vec![0.7; 150]).unwrap();
    for v in p.p {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn permuting_output_rows_permutes_probabilities() {
    let data = toy_corpus(5, 4);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    for arch in Arch::ALL {
        let config = DetectorConfig { max_epochs: 2, patience: 1, ..tiny_config(arch) };
        let (model, _) = train(&config, &refs).unwrap();
        let mut swapped = model.clone();
        let perm = [2usize, 0, 1];
        {
            let out = swapped.net.output_layer_mut();
            let n_in = out.input();
            let (w, b) = (out.w.data.clone(), out.b.data.clone());
            for (row, &src) in perm.iter().enumerate() {
                out.w.data[row * n_in..(row + 1) * n_in].copy_from_slice(&w[src * n_in..(src + 1) * n_in]);
                out.b.data[row] = b[src];
            }
        }
        let x: Vec<f64> = data[7].samples.iter().map(|v| v * 0.5).collect();
        let p = model.forward(&x).unwrap();
        let q = swapped.forward(&x).unwrap();
        let total: f64 = p.p.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
        for (row, &src) in perm.iter().enumerate() {
            assert_eq!(q.p[row], p.p[src], "{arch}");
        }
    }
}

#[test]
fn forward_rejects_wrong_length() {
    let data = toy_corpus(6, 4);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let config = DetectorConfig { max_epochs: 1, patience: 0, ..tiny_config(Arch::Lstm) };
    let (model, _) = train(&config, &refs).unwrap();
    assert!(matches!(model.forward(&[0.0; 149]), Err(dummyscan::Error::Shape(_))));
}

#[test]
fn metrics_from_confusion() {
    let all_right = Metrics::from_confusion([[5, 0, 0], [0, 7, 0], [0, 0, 2]]).unwrap();
    assert_eq!(all_right.accuracy, 1.0);
    assert_eq!(all_right.f1, 1.0);
    let one_off = Metrics::from_confusion([[10, 0, 0], [0, 10, 0], [1, 0, 10]]).unwrap();
    assert_eq!(one_off.accuracy, 30.0 / 31.0);
    // Idle: P = 10/11, R = 1; IoT: 1, 1; Mirai: P = 1, R = 10/11.
    let f_idle = 2.0 * (10.0 / 11.0) / (10.0 / 11.0 + 1.0);
    assert!((one_off.f1 - (2.0 * f_idle + 1.0) / 3.0).abs() < 1e-15);
    assert!((one_off.precision - (10.0 / 11.0 + 2.0) / 3.0).abs() < 1e-15);
    let none_predicted = Metrics::from_confusion([[3, 0, 0], [3, 0, 0], [3, 0, 0]]).unwrap();
    assert!((none_predicted.precision - (1.0 / 3.0) / 3.0).abs() < 1e-15);
    assert!(Metrics::from_confusion([[0; 3]; 3]).is_err());
}

#[test]
fn evaluate_rejects_empty_input() {
    let data = toy_corpus(6, 4);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let config = DetectorConfig { max_epochs: 1, patience: 0, ..tiny_config(Arch::Tcn) };
    let (model, _) = train(&config, &refs).unwrap();
    assert!(evaluate(&model, &[]).is_err());
}

#[test]
fn label_shuffled_accuracy_is_chance() {
    let data = toy_corpus(8, 20);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let config = DetectorConfig { max_epochs: 5, patience: 2, ..tiny_config(Arch::Tcn) };
    let (model, _) = train(&config, &refs).unwrap();
    let mut rng = stream(9, &[]);
    let mut shuffled = toy_corpus(10, 100);
    for w in &mut shuffled {
        w.label = ClassLabel::ALL[rng.random_range(0..3)];
    }
    let refs: Vec<&LabeledWindow> = shuffled.iter().collect();
    let acc = evaluate(&model, &refs).unwrap().accuracy;
    assert!((acc - 1.0 / 3.0).abs() <= 0.1, "accuracy {acc}");
}

#[test]
fn cross_validation_fold_bounds() {
    let data = toy_corpus(11, 4);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let base = DetectorConfig { max_epochs: 2, patience: 1, ..tiny_config(Arch::Tcn) };
    let ok = cross_validate(&DetectorConfig { folds: 2, ..base.clone() }, &refs).unwrap();
    assert_eq!(ok.folds.len(), 2);
    let lo = ok.folds.iter().map(|m| m.accuracy).fold(f64::INFINITY, f64::min);
    let hi = ok.folds.iter().map(|m| m.accuracy).fold(f64::NEG_INFINITY, f64::max);
    assert!(lo <= ok.mean.accuracy && ok.mean.accuracy <= hi);
    assert_eq!(ok, cross_validate(&DetectorConfig { folds: 2, ..base.clone() }, &refs).unwrap());
    let err = cross_validate(&DetectorConfig { folds: 5, ..base }, &refs).unwrap_err();
    assert!(matches!(err, dummyscan::Error::Parameter(_)), "{err}");
}

#[test]
fn config_invariants() {
    assert!(DetectorConfig { patience: 50, ..DetectorConfig::default() }.validate().is_err());
    assert!(DetectorConfig { folds: 1, ..DetectorConfig::default() }.validate().is_err());
    assert!(DetectorConfig::default().validate().is_ok());
    assert!("three_layer".parse::<Arch>().is_err());
    for a in Arch::ALL {
        assert_eq!(a.as_str().parse::<Arch>().unwrap(), a);
    }
}
