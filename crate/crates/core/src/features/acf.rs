use crate::error::{Error, Result};

/// Sample autocorrelation for lags `0..=max_lag`, normalized by the lag-0
/// sum of squares so `acf[0] == 1`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::InvalidLength(format!("series of length {n} cannot give lag {max_lag}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|d| d * d).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Undefined("autocorrelation of a zero-variance series".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                return 1.0;
            }
            let s: f64 = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
            s / denom
        })
        .collect())
}
