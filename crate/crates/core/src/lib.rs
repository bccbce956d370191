//! Simulation framework for dummy-code evasion of power side-channel
//! malware detectors.
//!
//! The pipeline synthesizes device power traces ([`tracegen`]), slices them
//! into labeled windows ([`corpus`]), trains sequence classifiers
//! ([`detect`]), measures how often perturbed scan traces evade them and how
//! well two defenses recover ([`evade`]), and runs the statistical
//! ([`stats`]) and attribution ([`explain`]) analyses.

pub mod corpus;
pub mod detect;
pub mod error;
pub mod evade;
pub mod experiment;
pub mod explain;
pub mod features;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stats;
pub mod tracegen;

pub use error::{Error, Result};
pub use tracegen::{ClassLabel, DeviceProfile, PerturbationSpec, PowerRun, ScanModel, ServiceModel, VariantKind};
