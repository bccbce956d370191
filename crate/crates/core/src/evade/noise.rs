use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::corpus::WINDOW_LEN;
use crate::detect::{ClassProbs, DetectorModel};
use crate::error::{Error, Result};

/// Number of non-redundant bins of a real 150-point transform (0..=75).
pub const N_BINS: usize = WINDOW_LEN / 2 + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBandDefense {
    /// Selected bins, ascending.
    pub band_indices: Vec<usize>,
    pub sigma_scale: f64,
    /// Mean clean-set magnitude of every bin 0..=75.
    pub clean_magnitude: Vec<f64>,
}

/// Magnitudes of bins 0..=75 of the unnormalized DFT of a 150-sample window.
pub fn magnitude_spectrum(window: &[f64]) -> Result<Vec<f64>> {
    if window.len() != WINDOW_LEN {
        return Err(Error::Shape(format!("spectrum needs {WINDOW_LEN} samples, got {}", window.len())));
    }
    let mut buf: Vec<Complex<f64>> = window.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(WINDOW_LEN).process(&mut buf);
    Ok(buf[..N_BINS].iter().map(|c| c.norm()).collect())
}

fn mean_spectrum(windows: &[&[f64]]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; N_BINS];
    for w in windows {
        for (a, m) in acc.iter_mut().zip(magnitude_spectrum(w)?) {
            *a += m;
        }
    }
    let n = windows.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Pick the ⌈top_fraction·76⌉ bins whose mean magnitude differs most between
/// perturbed and clean Mirai windows; ties go to the lower bin.
pub fn fit_noise_defense(
    clean: &[&[f64]],
    perturbed: &[&[f64]],
    top_fraction: f64,
    sigma_scale: f64,
) -> Result<NoiseBandDefense> {
    if clean.is_empty() || perturbed.is_empty() {
        return Err(Error::param("noise defense needs nonempty clean and perturbed window sets"));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::param(format!("top_fraction must lie in (0, 1], got {top_fraction}")));
    }
    if !(sigma_scale >= 0.0 && sigma_scale.is_finite()) {
        return Err(Error::param(format!("sigma_scale must be finite and >= 0, got {sigma_scale}")));
    }
    let mc = mean_spectrum(clean)?;
    let mp = mean_spectrum(perturbed)?;
    let k = ((top_fraction * N_BINS as f64).ceil() as usize).clamp(1, N_BINS);
    let mut order: Vec<usize> = (0..N_BINS).collect();
    order.sort_by(|&a, &b| (mp[b] - mc[b]).abs().total_cmp(&(mp[a] - mc[a]).abs()).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(NoiseBandDefense { band_indices: order, sigma_scale, clean_magnitude: mc })
}

impl NoiseBandDefense {
    /// One real 150-sample draw of band-limited Gaussian noise.
    ///
    /// Each selected bin gets a complex Gaussian coefficient with standard
    /// deviation `sigma_scale · clean_magnitude[bin]`; the Nyquist bin is real
    /// and the DC bin is left at zero so the noise has no offset. Conjugate
    /// mirroring makes the inverse transform real.
    pub fn sample_noise(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = WINDOW_LEN;
        let mut spec = vec![Complex::new(0.0, 0.0); n];
        for &k in &self.band_indices {
            let sd = self.sigma_scale * self.clean_magnitude[k];
            if k == 0 || sd == 0.0 {
                continue;
            }
            if 2 * k == n {
                spec[k] = Complex::new(Normal::new(0.0, sd).expect("finite sd").sample(rng), 0.0);
            } else {
                let half = Normal::new(0.0, sd / std::f64::consts::SQRT_2).expect("finite sd");
                let c = Complex::new(half.sample(rng), half.sample(rng));
                spec[k] = c;
                spec[n - k] = c.conj();
            }
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
        spec.iter().map(|c| c.re / n as f64).collect()
    }

    fn is_silent(&self) -> bool {
        self.sigma_scale == 0.0 || self.band_indices.iter().all(|&k| k == 0 || self.clean_magnitude[k] == 0.0)
    }

    /// Add one noise draw to a raw window.
    pub fn perturb(&self, window: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        if window.len() != WINDOW_LEN {
            return Err(Error::Shape(format!("defense expects {WINDOW_LEN} samples, got {}", window.len())));
        }
        if self.is_silent() {
            return Ok(window.to_vec());
        }
        Ok(window.iter().zip(self.sample_noise(rng)).map(|(x, e)| x + e).collect())
    }
}

/// Classify a raw window after adding band noise (before standardization).
pub fn defend_predict(
    model: &DetectorModel,
    defense: &NoiseBandDefense,
    window: &[f64],
    rng: &mut impl Rng,
) -> Result<ClassProbs> {
    model.predict(&defense.perturb(window, rng)?)
}
