//! Pearson correlation, one-way ANOVA, Granger causality and the
//! per-variant battery that combines them with elapsed-time overhead.

mod basic;
mod battery;
mod granger;
mod special;

pub use basic::{anova_oneway, pearson, TestResult};
pub use battery::{
    battery_runs, event_aligned, event_charge, run_battery, variant_battery, BatteryConfig, BatteryReport, VariantRow,
};
pub use granger::{granger, significance_fraction, GrangerResult};
pub use special::{f_sf, ln_gamma, reg_inc_beta};
