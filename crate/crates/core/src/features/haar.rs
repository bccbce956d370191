use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Orthonormal Haar decomposition: final approximation plus detail bands,
/// finest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarCoeffs {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

impl HaarCoeffs {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// All coefficients, approximation first then coarse-to-fine details.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.approx.clone();
        for d in self.details.iter().rev() {
            out.extend_from_slice(d);
        }
        out
    }
}

/// Zero-pad to the next power of two (150 -> 256).
pub fn pad_to_pow2(series: &[f64]) -> Vec<f64> {
    let mut out = series.to_vec();
    out.resize(series.len().next_power_of_two(), 0.0);
    out
}

pub fn haar_dwt(series: &[f64], levels: usize) -> Result<HaarCoeffs> {
    if levels == 0 {
        return Err(Error::param("haar_dwt needs at least one level"));
    }
    let block = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if block == 0 || series.is_empty() || series.len() % block != 0 {
        return Err(Error::Shape(format!(
            "length {} is not divisible by 2^{levels}; pad with pad_to_pow2 first",
            series.len()
        )));
    }
    let mut approx = series.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d): (Vec<f64>, Vec<f64>) =
            approx.chunks_exact(2).map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2)).unzip();
        details.push(d);
        approx = a;
    }
    Ok(HaarCoeffs { approx, details })
}

pub fn haar_idwt(coeffs: &HaarCoeffs) -> Result<Vec<f64>> {
    let mut approx = coeffs.approx.clone();
    for d in coeffs.details.iter().rev() {
        if d.len() != approx.len() {
            return Err(Error::Shape(format!("detail band of length {} vs approx {}", d.len(), approx.len())));
        }
        approx = approx
            .iter()
            .zip(d)
            .flat_map(|(a, d)| [(a + d) * FRAC_1_SQRT_2, (a - d) * FRAC_1_SQRT_2])
            .collect();
    }
    Ok(approx)
}
