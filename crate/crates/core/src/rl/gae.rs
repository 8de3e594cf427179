//! k-step and generalized advantage estimation.
//!
//! Slices hold one worker's `T` steps. `values` has `T + 1` entries: the
//! last is the bootstrap value of the state after the final step. `dones[t]`
//! marks that the episode ended with step `t`, so `values[t + 1]` belongs to
//! the next episode and is not used for step `t`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaeConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Steps per worker per update.
    pub k: usize,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            k: 30,
        }
    }
}

impl GaeConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err("lambda must be in [0, 1]");
        }
        if self.k == 0 {
            return Err("k must be at least 1");
        }
        Ok(())
    }
}

/// One-step TD residuals, cut at episode ends.
pub fn td_residuals(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64) -> Vec<f64> {
    assert_eq!(values.len(), rewards.len() + 1);
    assert_eq!(dones.len(), rewards.len());
    (0..rewards.len())
        .map(|t| {
            let next = if dones[t] { 0.0 } else { values[t + 1] };
            rewards[t] + gamma * next - values[t]
        })
        .collect()
}

/// Sum of up to `k` discounted residuals, stopping at an episode end or the
/// end of the buffer.
pub fn kstep_advantage(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, k: usize) -> Vec<f64> {
    let delta = td_residuals(rewards, values, dones, gamma);
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut s = 0.0;
            let mut g = 1.0;
            for l in t..n.min(t + k) {
                s += g * delta[l];
                if dones[l] {
                    break;
                }
                g *= gamma;
            }
            s
        })
        .collect()
}

/// Advantages and value targets (`advantage + value`).
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let delta = td_residuals(rewards, values, dones, gamma);
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut last = 0.0;
    for t in (0..n).rev() {
        let carry = if dones[t] { 0.0 } else { gamma * lambda * last };
        last = delta[t] + carry;
        adv[t] = last;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}
