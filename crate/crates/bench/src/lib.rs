//! Shared fixtures for the benchmarks.

use dummyscan::corpus::{build_corpus, Corpus, CorpusConfig, LabeledWindow};
use dummyscan::detect::{train, Arch, DetectorConfig, DetectorModel};

/// Desk-scale corpus at seed 42.
pub fn desk_corpus() -> Corpus {
    build_corpus(&CorpusConfig::desk(), 42).expect("desk corpus")
}

/// Default-config model trained for a couple of epochs; weights are realistic
/// in shape, not in accuracy.
pub fn short_trained(arch: Arch, corpus: &Corpus) -> DetectorModel {
    let config = DetectorConfig { max_epochs: 2, patience: 1, ..DetectorConfig::new(arch, 42) };
    let train_w: Vec<&LabeledWindow> = corpus.train();
    train(&config, &train_w).expect("training").0
}
