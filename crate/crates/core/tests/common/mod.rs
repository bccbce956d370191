#![allow(dead_code)]

use dummyscan::corpus::LabeledWindow;
use dummyscan::detect::{tiny_config, train, Arch, DetectorConfig, DetectorModel};
use dummyscan::rng::stream;
use dummyscan::{ClassLabel, VariantKind};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn toy_window(label: ClassLabel, run: usize, rng: &mut impl Rng) -> LabeledWindow {
    let noise = Normal::new(0.0, 0.3).unwrap();
    let samples = (0..150)
        .map(|t| {
            let base = match label {
                ClassLabel::Idle => 0.0,
                ClassLabel::IoTService => (t as f64 * 0.3).sin() * 2.0,
                ClassLabel::Mirai => if t % 20 < 3 { 4.0 } else { -0.5 },
            };
            base + noise.sample(rng)
        })
        .collect();
    LabeledWindow {
        samples,
        perturb_mask: vec![0; 150],
        label,
        device: "dev0".into(),
        variant: VariantKind::None,
        run_id: format!("{}-{run}", label.as_str()),
        offset: 0,
    }
}

pub fn toy_corpus(seed: u64, per_class: usize) -> Vec<LabeledWindow> {
    let mut rng = stream(seed, &[7]);
    ClassLabel::ALL.iter().flat_map(|&c| (0..per_class).map(|r| toy_window(c, r, &mut rng)).collect::<Vec<_>>()).collect()
}

/// Briefly trained tiny model; fast, not accurate.
pub fn quick_model(arch: Arch, seed: u64) -> DetectorModel {
    let data = toy_corpus(seed, 4);
    let refs: Vec<&LabeledWindow> = data.iter().collect();
    let config = DetectorConfig { max_epochs: 2, patience: 1, ..tiny_config(arch) };
    train(&config, &refs).unwrap().0
}

/// Model whose output ignores the input and always favours `class`.
pub fn constant_model(class: ClassLabel) -> DetectorModel {
    let mut model = quick_model(Arch::Lstm, 0);
    for t in model.net.params_mut() {
        t.fill(0.0);
    }
    model.net.output_layer_mut().b.data[class.index()] = 5.0;
    model
}
