use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top-k principal axes of the sample covariance (n - 1 normalization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Row-major k x d, rows orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn fit(vectors: &[Vec<f64>], k: usize) -> Result<PcaModel> {
        let Some(first) = vectors.first() else {
            return Err(Error::param("PCA needs training vectors"));
        };
        let d = first.len();
        if k == 0 || k > d {
            return Err(Error::param(format!("k = {k} must lie in 1..={d}")));
        }
        if vectors.len() < k + 1 {
            return Err(Error::param(format!("PCA with k = {k} needs at least {} vectors, got {}", k + 1, vectors.len())));
        }
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::Shape("PCA training vectors differ in length".into()));
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; d];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / n;
            }
        }
        let centered = DMatrix::from_fn(vectors.len(), d, |i, j| vectors[i][j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (n - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = Vec::with_capacity(k);
        let mut eigenvalues = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let mut axis: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            // Sign convention: the largest-magnitude entry is positive.
            let pivot = axis.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                axis.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(axis);
            eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        }
        Ok(PcaModel { mean, components, eigenvalues })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Shape(format!("vector of length {} vs PCA dimension {}", x.len(), self.mean.len())));
        }
        Ok(self
            .components
            .iter()
            .map(|row| row.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (row, s) in self.components.iter().zip(scores) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += s * c;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::rng::stream;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, &[]);
        // Correlated columns: x_j = sum_{i<=j} u_i.
        (0..n)
            .map(|_| {
                let mut acc = 0.0;
                (0..d)
                    .map(|_| {
                        acc += rng.random_range(-1.0..1.0);
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn line_data_has_rank_one() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let p = PcaModel::fit(&rows, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.components[0][0] - s).abs() < 1e-12 && (p.components[0][1] - s).abs() < 1e-12);
        assert!(p.eigenvalues[1].abs() < 1e-10);
    }

    #[test]
    fn components_orthonormal_and_scores_decorrelated() {
        let rows = random_rows(200, 12, 3);
        let p = PcaModel::fit(&rows, 12).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let dot: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8);
            }
        }
        assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let scores: Vec<Vec<f64>> = rows.iter().map(|r| p.project(r).unwrap()).collect();
        let n = rows.len() as f64;
        for i in 0..12 {
            for j in 0..12 {
                let c: f64 = scores.iter().map(|s| s[i] * s[j]).sum::<f64>() / (n - 1.0);
                let expect = if i == j { p.eigenvalues[i] } else { 0.0 };
                assert!((c - expect).abs() < 1e-6, "{i},{j}: {c} vs {expect}");
            }
        }
    }

    #[test]
    fn trace_identity_against_brute_force_covariance() {
        let rows = random_rows(300, 150, 5);
        let p = PcaModel::fit(&rows, 150).unwrap();
        let n = rows.len() as f64;
        let total: f64 = (0..150)
            .map(|j| {
                let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .sum();
        let sum: f64 = p.eigenvalues.iter().sum();
        assert!((sum - total).abs() < 1e-6 * total.max(1.0), "{sum} vs {total}");
    }

    #[test]
    fn reconstruction_error_nonincreasing_in_k() {
        let rows = random_rows(60, 10, 9);
        let err = |k: usize| {
            let p = PcaModel::fit(&rows, k).unwrap();
            rows.iter()
                .map(|r| {
                    let back = p.reconstruct(&p.project(r).unwrap());
                    r.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
        };
        let errs: Vec<f64> = (1..=10).map(err).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{errs:?}");
        assert!(errs[9] < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        let rows = random_rows(5, 4, 1);
        assert!(PcaModel::fit(&rows, 5).is_err());
        assert!(PcaModel::fit(&rows[..3], 3).is_err());
    }
}
