//! Diagonal Gaussian action distribution.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math::ln;

pub const ACTION_DIM: usize = 4;
/// `0.5 * ln(2 pi)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagGaussian {
    pub mu: [f64; ACTION_DIM],
    pub sigma: [f64; ACTION_DIM],
}

impl DiagGaussian {
    pub fn log_prob(&self, a: &[f64; ACTION_DIM]) -> f64 {
        let mut s = 0.0;
        for i in 0..ACTION_DIM {
            let z = (a[i] - self.mu[i]) / self.sigma[i];
            s += -0.5 * z * z - ln(self.sigma[i]) - HALF_LN_2PI;
        }
        s
    }

    /// `d log p / d mu` and `d log p / d sigma`.
    pub fn log_prob_grad(&self, a: &[f64; ACTION_DIM]) -> ([f64; ACTION_DIM], [f64; ACTION_DIM]) {
        let mut gm = [0.0; ACTION_DIM];
        let mut gs = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            let s = self.sigma[i];
            let d = a[i] - self.mu[i];
            gm[i] = d / (s * s);
            gs[i] = d * d / (s * s * s) - 1.0 / s;
        }
        (gm, gs)
    }

    pub fn entropy(&self) -> f64 {
        self.sigma.iter().map(|s| ln(*s) + 0.5 + HALF_LN_2PI).sum()
    }

    /// `d H / d sigma`.
    pub fn entropy_grad(&self) -> [f64; ACTION_DIM] {
        self.sigma.map(|s| 1.0 / s)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; ACTION_DIM] {
        core::array::from_fn(|i| {
            let e: f64 = rng.sample(StandardNormal);
            self.mu[i] + self.sigma[i] * e
        })
    }

    /// `KL(self || other)`.
    pub fn kl(&self, other: &DiagGaussian) -> f64 {
        let mut k = 0.0;
        for i in 0..ACTION_DIM {
            let (s0, s1) = (self.sigma[i], other.sigma[i]);
            let d = self.mu[i] - other.mu[i];
            k += ln(s1 / s0) + (s0 * s0 + d * d) / (2.0 * s1 * s1) - 0.5;
        }
        k
    }
}
