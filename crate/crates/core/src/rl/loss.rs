//! Actor-critic training loss and the sampled-Fisher surrogate.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::sqrt;
use crate::net::{Forward, ACTION_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Standardize advantages over the batch before use.
    pub normalize_advantages: bool,
    /// Value errors beyond this size are penalized linearly (Huber) instead
    /// of quadratically; 0 keeps the plain squared error.
    pub value_huber: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            value_coef: 0.5,
            entropy_coef: 0.01,
            normalize_advantages: false,
            value_huber: 0.0,
        }
    }
}

/// Loss value, its parts, and its gradient with respect to the outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOut {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub g_mu: Vec<[f64; ACTION_DIM]>,
    pub g_sigma: Vec<[f64; ACTION_DIM]>,
    pub g_value: Vec<f64>,
}

pub fn standardize(x: &mut [f64]) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return;
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = sqrt(var).max(1e-8);
    x.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

/// Batch mean of `-A log pi(a) + c_v (v - R)^2 - c_e H`, with the value
/// term optionally Huberized.
pub fn a2c_loss(
    f: &Forward,
    actions: &[[f64; ACTION_DIM]],
    advantages: &[f64],
    targets: &[f64],
    cfg: &LossConfig,
) -> LossOut {
    let b = actions.len();
    assert!(advantages.len() == b && targets.len() == b && f.value.len() == b);
    let mut adv = advantages.to_vec();
    if cfg.normalize_advantages {
        standardize(&mut adv);
    }
    let inv = 1.0 / b as f64;
    let mut out = LossOut {
        total: 0.0,
        policy: 0.0,
        value: 0.0,
        entropy: 0.0,
        g_mu: Vec::with_capacity(b),
        g_sigma: Vec::with_capacity(b),
        g_value: Vec::with_capacity(b),
    };
    for r in 0..b {
        let p = f.policy(r);
        let (dm, ds) = p.log_prob_grad(&actions[r]);
        let dh = p.entropy_grad();
        out.policy -= adv[r] * p.log_prob(&actions[r]) * inv;
        out.entropy += p.entropy() * inv;
        let mut e = f.value[r] - targets[r];
        let d = cfg.value_huber;
        if d > 0.0 && e.abs() > d {
            out.value += d * (2.0 * e.abs() - d) * inv;
            e = d * e.signum();
        } else {
            out.value += e * e * inv;
        }
        out.g_mu.push(core::array::from_fn(|k| -adv[r] * dm[k] * inv));
        out.g_sigma
            .push(core::array::from_fn(|k| (-adv[r] * ds[k] - cfg.entropy_coef * dh[k]) * inv));
        out.g_value.push(2.0 * cfg.value_coef * e * inv);
    }
    out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
    out
}

/// Output gradients of the model's own predictive log-likelihood at sampled
/// targets: actions drawn from the policy, values perturbed by unit Gaussian
/// noise. Their outer products estimate the Fisher.
pub fn fisher_sample_grads<R: Rng + ?Sized>(
    f: &Forward,
    rng: &mut R,
) -> (Vec<[f64; ACTION_DIM]>, Vec<[f64; ACTION_DIM]>, Vec<f64>) {
    let b = f.value.len();
    let inv = 1.0 / b as f64;
    let mut gm = Vec::with_capacity(b);
    let mut gs = Vec::with_capacity(b);
    let mut gv = Vec::with_capacity(b);
    for r in 0..b {
        let p = f.policy(r);
        let a = p.sample(rng);
        let (dm, ds) = p.log_prob_grad(&a);
        gm.push(dm.map(|v| -v * inv));
        gs.push(ds.map(|v| -v * inv));
        let e: f64 = rng.sample(StandardNormal);
        // d/dv of (v - (v + e))^2 / 2 with the target held fixed.
        gv.push(-e * inv);
    }
    (gm, gs, gv)
}
