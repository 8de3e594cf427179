//! Running standard-score normalization.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::sqrt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean.
    pub m2: Vec<f64>,
    pub eps: f64,
    /// Normalized values are clipped to `[-clip, clip]`.
    pub clip: f64,
}

impl RunningNorm {
    pub fn new(dim: usize, eps: f64, clip: f64) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            eps,
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Population standard deviation, floored at `eps`; 1 before any data.
    pub fn std(&self, i: usize) -> f64 {
        if self.count == 0.0 {
            return 1.0;
        }
        sqrt(self.m2[i] / self.count).max(self.eps)
    }

    /// Merges a batch of `rows x dim` samples (Chan's pairwise update).
    pub fn update(&mut self, x: &[f64], rows: usize) {
        let d = self.dim();
        if rows == 0 {
            return;
        }
        let nb = rows as f64;
        for i in 0..d {
            let mut mb = 0.0;
            for r in 0..rows {
                mb += x[r * d + i];
            }
            mb /= nb;
            let mut m2b = 0.0;
            for r in 0..rows {
                let e = x[r * d + i] - mb;
                m2b += e * e;
            }
            let n = self.count + nb;
            let delta = mb - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += m2b + delta * delta * self.count * nb / n;
        }
        self.count += nb;
    }

    /// Normalizes in place and returns, per entry, the derivative of the
    /// output with respect to the input (0 where clipped).
    pub fn apply(&self, x: &mut [f64]) -> Vec<f64> {
        let d = self.dim();
        let inv: Vec<f64> = (0..d).map(|i| 1.0 / self.std(i)).collect();
        let mut slope = vec![0.0; x.len()];
        for (j, v) in x.iter_mut().enumerate() {
            let i = j % d;
            let y = (*v - self.mean[i]) * inv[i];
            if y > self.clip {
                *v = self.clip;
            } else if y < -self.clip {
                *v = -self.clip;
            } else {
                *v = y;
                slope[j] = inv[i];
            }
        }
        slope
    }
}
