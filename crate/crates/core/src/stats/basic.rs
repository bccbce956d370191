use serde::{Deserialize, Serialize};

use super::special::f_sf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Numerator and denominator degrees of freedom.
    pub df: (f64, f64),
}

impl TestResult {
    pub(crate) fn f_test(statistic: f64, df1: f64, df2: f64) -> Result<TestResult> {
        if !statistic.is_finite() {
            return Err(Error::Degenerate(format!("F statistic is {statistic}")));
        }
        Ok(TestResult { statistic, p_value: f_sf(statistic, df1, df2)?, df: (df1, df2) })
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("pearson inputs differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InvalidLength(format!("pearson needs at least 3 points, got {}", x.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("pearson correlation of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One-way ANOVA: F = MS_between / MS_within with (k−1, N−k) degrees of freedom.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::param(format!("ANOVA needs at least 2 groups, got {}", groups.len())));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.as_ref().len() < 2) {
        return Err(Error::param(format!("ANOVA group {i} has {} values, needs at least 2", g.as_ref().len())));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| mean(g.as_ref())).collect();
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let ssb: f64 = groups.iter().zip(&means).map(|(g, m)| g.as_ref().len() as f64 * (m - grand).powi(2)).sum();
    let ssw: f64 = groups.iter().zip(&means).map(|(g, m)| g.as_ref().iter().map(|v| (v - m).powi(2)).sum::<f64>()).sum();
    let (df1, df2) = ((k - 1) as f64, (n - k) as f64);
    if ssw == 0.0 {
        let what = if ssb == 0.0 { "all groups constant with equal means" } else { "zero within-group variance" };
        return Err(Error::Degenerate(format!("ANOVA undefined: {what}")));
    }
    TestResult::f_test((ssb / df1) / (ssw / df2), df1, df2)
}
