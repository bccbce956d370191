use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basic::TestResult;
use crate::error::{Error, Result};

/// Relative size below which a diagonal entry of R marks the design as singular.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    /// Entry `l - 1` tests lags 1..=l.
    pub lags: Vec<TestResult>,
}

impl GrangerResult {
    pub fn max_lag(&self) -> usize {
        self.lags.len()
    }
}

/// Residual sum of squares of the least-squares fit of `y` on `x`.
fn ols_rss(x: DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..r.ncols()).any(|i| r[(i, i)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Regression("singular design matrix (collinear or constant regressors)".into()));
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Regression("singular design matrix".into()))?;
    let resid = y - x * beta;
    Ok(resid.norm_squared())
}

fn design(x: &[f64], y: &[f64], lag: usize, with_x: bool) -> DMatrix<f64> {
    let rows = y.len() - lag;
    let cols = 1 + lag + if with_x { lag } else { 0 };
    DMatrix::from_fn(rows, cols, |i, j| {
        let t = i + lag;
        match j {
            0 => 1.0,
            j if j <= lag => y[t - j],
            j => x[t - (j - lag)],
        }
    })
}

/// Does `x` help predict `y`? For each lag L in 1..=max_lag, compares the
/// restricted regression of y_t on (1, y_{t−1..t−L}) with the unrestricted
/// one that adds x_{t−1..t−L}, over t = L..n.
pub fn granger(x: &[f64], y: &[f64], max_lag: usize) -> Result<GrangerResult> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("granger inputs differ in length: {} vs {}", x.len(), y.len())));
    }
    if max_lag == 0 {
        return Err(Error::param("granger max_lag must be at least 1"));
    }
    if y.len() <= 4 * max_lag + 2 {
        return Err(Error::param(format!(
            "granger with max_lag {max_lag} needs more than {} samples, got {}",
            4 * max_lag + 2,
            y.len()
        )));
    }
    let mut lags = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let target = DVector::from_column_slice(&y[lag..]);
        let rss_r = ols_rss(design(x, y, lag, false), &target)?;
        let rss_u = ols_rss(design(x, y, lag, true), &target)?;
        let t = (y.len() - lag) as f64;
        let df2 = t - 2.0 * lag as f64 - 1.0;
        if rss_u == 0.0 {
            return Err(Error::Degenerate("unrestricted granger model fits exactly".into()));
        }
        let f = ((rss_r - rss_u).max(0.0) / lag as f64) / (rss_u / df2);
        lags.push(TestResult::f_test(f, lag as f64, df2)?);
    }
    Ok(GrangerResult { lags })
}

/// Per-lag fraction of results with p < alpha.
pub fn significance_fraction(results: &[GrangerResult], alpha: f64) -> Result<Vec<f64>> {
    let first = results.first().ok_or_else(|| Error::param("significance fraction of zero results is undefined"))?;
    let l = first.max_lag();
    if results.iter().any(|r| r.max_lag() != l) {
        return Err(Error::param("granger results disagree on max_lag"));
    }
    Ok((0..l)
        .map(|i| results.iter().filter(|r| r.lags[i].significant(alpha)).count() as f64 / results.len() as f64)
        .collect())
}
