//! Kronecker-factored approximate natural gradient with a KL trust region.
//!
//! For each layer the Fisher block is approximated by `A (x) G`, where `A` is
//! the second moment of the bias-augmented layer input and `G` that of the
//! per-sample pre-activation gradient under the model's own predictive
//! distribution. For convolutions the rows are patch positions and `G` is
//! summed over positions (the usual spatially-uncorrelated factorization).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{matmul_nn, matmul_tn, spd_inverse, trace};
use crate::math::sqrt;
use crate::net::{Linear, LinearGrad, PolicyValueNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfacConfig {
    pub learning_rate: f64,
    pub damping: f64,
    pub kl_target: f64,
    /// Exponential moving-average decay of the factor statistics.
    pub stat_decay: f64,
    /// Factor inverses are recomputed every this many steps.
    pub inverse_every: u64,
}

impl Default for KfacConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.25,
            damping: 1e-2,
            kl_target: 1e-3,
            stat_decay: 0.99,
            inverse_every: 10,
        }
    }
}

impl KfacConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.learning_rate) && pos(self.damping) && pos(self.kl_target)) {
            return Err("learning_rate, damping and kl_target must be positive");
        }
        if !(0.0..1.0).contains(&self.stat_decay) || self.inverse_every == 0 {
            return Err("stat_decay must be in [0, 1) and inverse_every >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KfacError {
    #[error("damped factor of layer {0} is not positive definite")]
    NotPositiveDefinite(usize),
    #[error("preconditioned gradient has non-positive or non-finite norm {0}")]
    Degenerate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFactors {
    pub n_in: usize,
    pub n_out: usize,
    /// `(n_in + 1)^2`, bias-augmented input second moment.
    pub a: Vec<f64>,
    /// `n_out^2`.
    pub g: Vec<f64>,
    pub seen: bool,
    #[serde(skip)]
    a_inv: Vec<f64>,
    #[serde(skip)]
    g_inv: Vec<f64>,
}

impl LayerFactors {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            a: vec![0.0; (n_in + 1) * (n_in + 1)],
            g: vec![0.0; n_out * n_out],
            seen: false,
            a_inv: Vec::new(),
            g_inv: Vec::new(),
        }
    }

    /// Factored Tikhonov split: `A + pi sqrt(d) I` and `G + sqrt(d)/pi I`.
    pub fn damped(&self, damping: f64) -> (Vec<f64>, Vec<f64>) {
        let (da, dg) = (self.n_in + 1, self.n_out);
        let ta = trace(&self.a, da) / da as f64;
        let tg = trace(&self.g, dg) / dg as f64;
        let pi = if ta > 0.0 && tg > 0.0 { sqrt(ta / tg) } else { 1.0 };
        let s = sqrt(damping);
        let mut a = self.a.clone();
        let mut g = self.g.clone();
        for i in 0..da {
            a[i * da + i] += pi * s;
        }
        for i in 0..dg {
            g[i * dg + i] += s / pi;
        }
        (a, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KfacStep {
    /// Preconditioned gradient; parameters move by `-eta * direction`.
    pub direction: Vec<LinearGrad>,
    pub eta: f64,
    /// `g^T F^-1 g` under the damped factors.
    pub quad: f64,
    /// Per-layer terms of `quad`.
    pub layer_quad: Vec<f64>,
    /// `eta^2 quad / 2`.
    pub predicted_kl: f64,
    pub inverses_refreshed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kfac {
    pub cfg: KfacConfig,
    pub layers: Vec<LayerFactors>,
    pub steps: u64,
    #[serde(skip)]
    inverses_ready: bool,
}

impl Kfac {
    pub fn new(cfg: KfacConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            cfg,
            layers: shapes.into_iter().map(|(i, o)| LayerFactors::new(i, o)).collect(),
            steps: 0,
            inverses_ready: false,
        }
    }

    pub fn for_net(cfg: KfacConfig, net: &PolicyValueNet) -> Self {
        Self::new(cfg, net.layers.iter().map(|l: &Linear| (l.n_in, l.n_out)))
    }

    /// Folds one batch into layer `i`'s factors. `inputs` is `rows x n_in`;
    /// `signals` holds the pre-activation gradients of the batch-mean Fisher
    /// surrogate, `rows x n_out`, over `batch` samples.
    pub fn accumulate(&mut self, i: usize, inputs: &[f64], signals: &[f64], rows: usize, batch: usize) {
        let l = &mut self.layers[i];
        let (n_in, n_out) = (l.n_in, l.n_out);
        let da = n_in + 1;
        let mut aug = vec![1.0; rows * da];
        for r in 0..rows {
            aug[r * da..r * da + n_in].copy_from_slice(&inputs[r * n_in..(r + 1) * n_in]);
        }
        let mut a = vec![0.0; da * da];
        matmul_tn(&aug, &aug, rows, da, da, &mut a, false);
        a.iter_mut().for_each(|v| *v /= rows as f64);
        // Per-sample gradients are `batch * signal`; G = sum over rows of
        // their outer products, averaged over samples.
        let mut g = vec![0.0; n_out * n_out];
        matmul_tn(signals, signals, rows, n_out, n_out, &mut g, false);
        g.iter_mut().for_each(|v| *v *= batch as f64);
        if l.seen {
            let d = self.cfg.stat_decay;
            for (x, y) in l.a.iter_mut().zip(&a) {
                *x = d * *x + (1.0 - d) * y;
            }
            for (x, y) in l.g.iter_mut().zip(&g) {
                *x = d * *x + (1.0 - d) * y;
            }
        } else {
            l.a = a;
            l.g = g;
            l.seen = true;
        }
    }

    pub fn refresh_inverses(&mut self) -> Result<(), KfacError> {
        let damping = self.cfg.damping;
        for (i, l) in self.layers.iter_mut().enumerate() {
            let (a, g) = l.damped(damping);
            l.a_inv = spd_inverse(&a, l.n_in + 1).ok_or(KfacError::NotPositiveDefinite(i))?;
            l.g_inv = spd_inverse(&g, l.n_out).ok_or(KfacError::NotPositiveDefinite(i))?;
        }
        self.inverses_ready = true;
        Ok(())
    }

    /// Drops all statistics (after a numerical failure).
    pub fn reset(&mut self) {
        for l in &mut self.layers {
            *l = LayerFactors::new(l.n_in, l.n_out);
        }
        self.inverses_ready = false;
    }

    /// `G^-1 [dW | db] A^-1` per layer, with the current inverses.
    pub fn precondition(&self, grads: &[LinearGrad]) -> Vec<LinearGrad> {
        assert!(self.inverses_ready, "inverses not computed");
        self.layers
            .iter()
            .zip(grads)
            .map(|(l, gr)| {
                let (n_in, n_out) = (l.n_in, l.n_out);
                let da = n_in + 1;
                let mut m = vec![0.0; n_out * da];
                for o in 0..n_out {
                    m[o * da..o * da + n_in].copy_from_slice(&gr.w[o * n_in..(o + 1) * n_in]);
                    m[o * da + n_in] = gr.b[o];
                }
                let mut gm = vec![0.0; n_out * da];
                matmul_nn(&l.g_inv, &m, n_out, n_out, da, &mut gm);
                let mut out = vec![0.0; n_out * da];
                matmul_nn(&gm, &l.a_inv, n_out, da, da, &mut out);
                let mut d = LinearGrad {
                    w: vec![0.0; n_out * n_in],
                    b: vec![0.0; n_out],
                };
                for o in 0..n_out {
                    d.w[o * n_in..(o + 1) * n_in].copy_from_slice(&out[o * da..o * da + n_in]);
                    d.b[o] = out[o * da + n_in];
                }
                d
            })
            .collect()
    }

    /// Natural-gradient step with `eta = min(lr, sqrt(2 kl / g^T F^-1 g))`.
    pub fn step(&mut self, grads: &[LinearGrad]) -> Result<KfacStep, KfacError> {
        let refresh = !self.inverses_ready || self.steps % self.cfg.inverse_every == 0;
        if refresh {
            self.refresh_inverses()?;
        }
        self.steps += 1;
        let direction = self.precondition(grads);
        let layer_quad: Vec<f64> = direction.iter().zip(grads).map(|(d, g)| d.dot(g)).collect();
        let quad: f64 = layer_quad.iter().sum();
        if !(quad.is_finite() && quad > 0.0) {
            return Err(KfacError::Degenerate(quad));
        }
        let eta = self.cfg.learning_rate.min(sqrt(2.0 * self.cfg.kl_target / quad));
        Ok(KfacStep {
            direction,
            eta,
            quad,
            layer_quad,
            predicted_kl: 0.5 * eta * eta * quad,
            inverses_refreshed: refresh,
        })
    }
}
