use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-position z-scoring fitted on training windows (population variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Positions whose training variance was zero; their std is set to 1.
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn fit<'a, I>(windows: I) -> Result<Scaler>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = windows.into_iter().peekable();
        let Some(first) = iter.peek() else {
            return Err(Error::param("cannot fit a scaler on an empty training set"));
        };
        let len = first.len();
        let mut sum = vec![0.0; len];
        let mut rows: Vec<&[f64]> = Vec::new();
        for w in iter {
            if w.len() != len {
                return Err(Error::Shape(format!("window of length {} vs {len}", w.len())));
            }
            for (s, x) in sum.iter_mut().zip(w) {
                *s += x;
            }
            rows.push(w);
        }
        if rows.len() < 2 {
            return Err(Error::param("scaler needs at least two training windows"));
        }
        let n = rows.len() as f64;
        let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut var = vec![0.0; len];
        for w in &rows {
            for ((v, x), m) in var.iter_mut().zip(*w).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        let constant: Vec<bool> = var.iter().map(|&v| v <= 0.0).collect();
        let stds = var.iter().zip(&constant).map(|(&v, &c)| if c { 1.0 } else { (v / n).sqrt() }).collect();
        Ok(Scaler { means, stds, constant })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.len() {
            return Err(Error::Shape(format!("window of length {} vs scaler {}", window.len(), self.len())));
        }
        Ok(window.iter().zip(&self.means).zip(&self.stds).map(|((x, m), s)| (x - m) / s).collect())
    }

    /// Map a standardized vector back to raw units.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.means).zip(&self.stds).map(|((z, m), s)| z * s + m).collect()
    }
}
