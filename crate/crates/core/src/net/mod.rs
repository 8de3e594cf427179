//! Shared-trunk actor-critic network with hand-written backward passes.
//!
//! Pixel mode: three valid convolutions and a 512-unit layer (leaky ReLU),
//! whose output goes through a running standard-score unit and is joined by
//! the normalized proprio stack. Low-dim mode: the normalized feature vector
//! goes through a 64-64 leaky-ReLU MLP. Both trunks feed a tanh policy head
//! (64, 64, 8) and a leaky-ReLU value head (64, 64, 1).
//!
//! The first four policy outputs, scaled by `action_scale`, are the action
//! means. The last four give `sigma = softplus(t) + sigma_min`.
//!
//! Layer order, used by gradients, the optimizer and checkpoints: trunk
//! layers input to output, then the three policy layers, then the three
//! value layers.

pub mod gaussian;
pub mod init;
pub mod layers;
pub mod normalize;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ObservationMode, Observation, IMAGE_HEIGHT, IMAGE_WIDTH, LOW_DIM_LEN, PROPRIO_LEN, STACK};
use crate::math::{sigmoid, softplus, sqrt, tanh};
pub use gaussian::{DiagGaussian, ACTION_DIM};
pub use layers::{ConvGeom, Linear, LinearGrad};
pub use normalize::RunningNorm;

pub const PIXEL_CHANNELS: usize = 3 * STACK;
pub const PIXEL_LEN: usize = PIXEL_CHANNELS * IMAGE_HEIGHT * IMAGE_WIDTH;
pub const POLICY_OUT: usize = 2 * ACTION_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub mode: ObservationMode,
    pub sigma_min: f64,
    /// Multiplies the tanh mean outputs; torque limits, then 1 for the grip.
    pub action_scale: [f64; ACTION_DIM],
    pub leaky_slope: f64,
    pub hidden: usize,
    pub feature_dim: usize,
    pub norm_eps: f64,
    pub norm_clip: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            mode: ObservationMode::Pixels,
            sigma_min: 1e-3,
            action_scale: [2.0, 2.0, 2.0, 1.0],
            leaky_slope: 0.01,
            hidden: 64,
            feature_dim: 512,
            norm_eps: 1e-8,
            norm_clip: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("input shape mismatch: {0}")]
    Shape(String),
    #[error("invalid network config: {0}")]
    Config(&'static str),
}

/// A batch of network inputs. Pixels are per-sample channel-major
/// `[frame * 3 + rgb][y][x]` in [0, 1].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetInput {
    pub batch: usize,
    pub pixels: Vec<f64>,
    pub vector: Vec<f64>,
}

impl NetInput {
    pub fn from_observations<'a>(obs: impl IntoIterator<Item = &'a Observation>) -> Self {
        let mut inp = NetInput::default();
        for o in obs {
            inp.batch += 1;
            inp.pixels.extend(o.pixels());
            inp.vector.extend_from_slice(&o.vector);
        }
        inp
    }

    pub fn push(&mut self, o: &Observation) {
        self.batch += 1;
        self.pixels.extend(o.pixels());
        self.vector.extend_from_slice(&o.vector);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValueNet {
    pub cfg: NetConfig,
    /// Geometry of the leading conv layers (empty in low-dim mode).
    pub convs: Vec<ConvGeom>,
    pub layers: Vec<Linear>,
    /// Proprio stack (pixels) or feature vector (low-dim).
    pub input_norm: RunningNorm,
    /// Trunk output (pixels only).
    pub feature_norm: Option<RunningNorm>,
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    pub batch: usize,
    /// Per layer, the matrix it multiplied (patch rows for convolutions).
    pub inputs: Vec<Vec<f64>>,
    /// Per layer pre-activations.
    pub pre: Vec<Vec<f64>>,
    /// Rows per layer: `batch * positions` for convolutions, else `batch`.
    pub rows: Vec<usize>,
    feature_slope: Vec<f64>,
    policy_t: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub mu: Vec<[f64; ACTION_DIM]>,
    pub sigma: Vec<[f64; ACTION_DIM]>,
    pub value: Vec<f64>,
    pub cache: Cache,
}

impl Forward {
    pub fn policy(&self, i: usize) -> DiagGaussian {
        DiagGaussian {
            mu: self.mu[i],
            sigma: self.sigma[i],
        }
    }
}

/// Gradient of a scalar loss for every layer, plus each layer's
/// pre-activation gradient (the optimizer's output-side statistics).
#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: Vec<LinearGrad>,
    pub signals: Vec<Vec<f64>>,
}

fn leaky(x: f64, s: f64) -> f64 {
    if x > 0.0 { x } else { s * x }
}

fn leaky_d(x: f64, s: f64) -> f64 {
    if x > 0.0 { 1.0 } else { s }
}

impl PolicyValueNet {
    /// Builds the network with orthogonal weights (gain sqrt 2 for hidden
    /// layers, 0.01 for the policy output, 1 for the value output) and zero
    /// biases.
    pub fn new<R: Rng + ?Sized>(cfg: NetConfig, rng: &mut R) -> Result<Self, NetError> {
        let mut net = Self::zeros(cfg)?;
        let n = net.layers.len();
        for (i, l) in net.layers.iter_mut().enumerate() {
            let gain = if i == n - 4 {
                0.01
            } else if i == n - 1 {
                1.0
            } else {
                sqrt(2.0)
            };
            l.w = init::orthogonal(l.n_out, l.n_in, gain, rng);
        }
        Ok(net)
    }

    /// All weights and biases zero.
    pub fn zeros(cfg: NetConfig) -> Result<Self, NetError> {
        if !(cfg.sigma_min > 0.0) || cfg.hidden == 0 || cfg.feature_dim == 0 {
            return Err(NetError::Config("sigma_min, hidden and feature_dim must be positive"));
        }
        if !(cfg.norm_eps > 0.0 && cfg.norm_clip > 0.0) {
            return Err(NetError::Config("norm_eps and norm_clip must be positive"));
        }
        let h = cfg.hidden;
        let mut layers = Vec::new();
        let mut convs = Vec::new();
        let (head_in, input_norm, feature_norm) = match cfg.mode {
            ObservationMode::Pixels => {
                let mut geom = ConvGeom {
                    in_h: IMAGE_HEIGHT,
                    in_w: IMAGE_WIDTH,
                    in_c: PIXEL_CHANNELS,
                    out_c: 32,
                    kernel: 8,
                    stride: 4,
                };
                for (out_c, kernel, stride) in [(32, 8, 4), (64, 4, 2), (32, 3, 1)] {
                    geom.out_c = out_c;
                    geom.kernel = kernel;
                    geom.stride = stride;
                    layers.push(Linear::zeros(geom.patch_len(), out_c));
                    convs.push(geom);
                    geom = ConvGeom {
                        in_h: geom.out_h(),
                        in_w: geom.out_w(),
                        in_c: out_c,
                        ..geom
                    };
                }
                let flat = convs[2].out_len();
                layers.push(Linear::zeros(flat, cfg.feature_dim));
                let p = STACK * PROPRIO_LEN;
                (
                    cfg.feature_dim + p,
                    RunningNorm::new(p, cfg.norm_eps, cfg.norm_clip),
                    Some(RunningNorm::new(cfg.feature_dim, cfg.norm_eps, cfg.norm_clip)),
                )
            }
            ObservationMode::LowDim => {
                layers.push(Linear::zeros(LOW_DIM_LEN, h));
                layers.push(Linear::zeros(h, h));
                (h, RunningNorm::new(LOW_DIM_LEN, cfg.norm_eps, cfg.norm_clip), None)
            }
        };
        layers.push(Linear::zeros(head_in, h));
        layers.push(Linear::zeros(h, h));
        layers.push(Linear::zeros(h, POLICY_OUT));
        layers.push(Linear::zeros(head_in, h));
        layers.push(Linear::zeros(h, h));
        layers.push(Linear::zeros(h, 1));
        Ok(Self {
            cfg,
            convs,
            layers,
            input_norm,
            feature_norm,
        })
    }

    pub fn trunk_len(&self) -> usize {
        self.layers.len() - 6
    }

    pub fn policy_layers(&self) -> core::ops::Range<usize> {
        self.trunk_len()..self.trunk_len() + 3
    }

    pub fn value_layers(&self) -> core::ops::Range<usize> {
        self.trunk_len() + 3..self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum()
    }

    /// Human-readable shape summary; its hash guards checkpoints.
    pub fn architecture(&self) -> String {
        let mut s = format!("mode={:?};", self.cfg.mode);
        for g in &self.convs {
            s += &format!("conv{}x{}x{}->{}k{}s{};", g.in_h, g.in_w, g.in_c, g.out_c, g.kernel, g.stride);
        }
        for l in &self.layers {
            s += &format!("fc{}->{};", l.n_in, l.n_out);
        }
        s += &format!(
            "sigma_min={};scale={:?};slope={}",
            self.cfg.sigma_min, self.cfg.action_scale, self.cfg.leaky_slope
        );
        s
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }

    fn check(&self, inp: &NetInput) -> Result<(), NetError> {
        let b = inp.batch;
        let (vl, pl) = match self.cfg.mode {
            ObservationMode::Pixels => (STACK * PROPRIO_LEN, PIXEL_LEN),
            ObservationMode::LowDim => (LOW_DIM_LEN, 0),
        };
        if inp.vector.len() != b * vl || (pl > 0 && inp.pixels.len() != b * pl) {
            return Err(NetError::Shape(format!(
                "batch {b}: vector {} (want {}), pixels {} (want {})",
                inp.vector.len(),
                b * vl,
                inp.pixels.len(),
                b * pl
            )));
        }
        Ok(())
    }

    /// Channel-major pixels to NHWC.
    fn pixels_nhwc(pixels: &[f64], batch: usize) -> Vec<f64> {
        let (h, w, c) = (IMAGE_HEIGHT, IMAGE_WIDTH, PIXEL_CHANNELS);
        let mut out = vec![0.0; pixels.len()];
        for b in 0..batch {
            let src = &pixels[b * PIXEL_LEN..(b + 1) * PIXEL_LEN];
            let dst = &mut out[b * PIXEL_LEN..(b + 1) * PIXEL_LEN];
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        dst[(y * w + x) * c + ch] = src[(ch * h + y) * w + x];
                    }
                }
            }
        }
        out
    }

    /// Raw (un-normalized) pixel trunk output, `batch x feature_dim`.
    fn pixel_features(&self, inp: &NetInput, cache: &mut Cache) -> Vec<f64> {
        let b = inp.batch;
        let s = self.cfg.leaky_slope;
        let mut act = Self::pixels_nhwc(&inp.pixels, b);
        for (i, g) in self.convs.iter().enumerate() {
            let patches = g.im2col(&act, b);
            let rows = b * g.positions();
            let z = self.layers[i].forward(&patches, rows);
            act = z.iter().map(|v| leaky(*v, s)).collect();
            cache.inputs.push(patches);
            cache.pre.push(z);
            cache.rows.push(rows);
        }
        let fc = &self.layers[self.convs.len()];
        let z = fc.forward(&act, b);
        let out = z.iter().map(|v| leaky(*v, s)).collect();
        cache.inputs.push(act);
        cache.pre.push(z);
        cache.rows.push(b);
        out
    }

    fn empty_cache(&self, batch: usize) -> Cache {
        Cache {
            batch,
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            rows: Vec::with_capacity(self.layers.len()),
            feature_slope: Vec::new(),
            policy_t: Vec::new(),
        }
    }

    pub fn forward(&self, inp: &NetInput) -> Result<Forward, NetError> {
        self.check(inp)?;
        let b = inp.batch;
        let s = self.cfg.leaky_slope;
        let mut cache = self.empty_cache(b);
        let mut vec_in = inp.vector.clone();
        self.input_norm.apply(&mut vec_in);
        let head_in = match self.cfg.mode {
            ObservationMode::Pixels => {
                let mut feat = self.pixel_features(inp, &mut cache);
                let norm = self.feature_norm.as_ref().expect("pixel net has a feature normalizer");
                cache.feature_slope = norm.apply(&mut feat);
                let (f, p) = (self.cfg.feature_dim, STACK * PROPRIO_LEN);
                let mut h = vec![0.0; b * (f + p)];
                for r in 0..b {
                    h[r * (f + p)..r * (f + p) + f].copy_from_slice(&feat[r * f..(r + 1) * f]);
                    h[r * (f + p) + f..(r + 1) * (f + p)].copy_from_slice(&vec_in[r * p..(r + 1) * p]);
                }
                h
            }
            ObservationMode::LowDim => {
                let mut act = vec_in;
                for i in 0..2 {
                    let z = self.layers[i].forward(&act, b);
                    let next = z.iter().map(|v| leaky(*v, s)).collect();
                    cache.inputs.push(act);
                    cache.pre.push(z);
                    cache.rows.push(b);
                    act = next;
                }
                act
            }
        };

        // Policy head.
        let mut act = head_in.clone();
        for i in self.policy_layers() {
            let z = self.layers[i].forward(&act, b);
            let next: Vec<f64> = z.iter().map(|v| tanh(*v)).collect();
            cache.inputs.push(act);
            cache.pre.push(z);
            cache.rows.push(b);
            act = next;
        }
        let t = act;
        let mut mu = Vec::with_capacity(b);
        let mut sigma = Vec::with_capacity(b);
        for r in 0..b {
            let o = &t[r * POLICY_OUT..(r + 1) * POLICY_OUT];
            mu.push(core::array::from_fn(|k| self.cfg.action_scale[k] * o[k]));
            sigma.push(core::array::from_fn(|k| softplus(o[ACTION_DIM + k]) + self.cfg.sigma_min));
        }
        cache.policy_t = t;

        // Value head.
        let mut act = head_in;
        for i in self.value_layers() {
            let z = self.layers[i].forward(&act, b);
            let next = z.iter().map(|v| leaky(*v, s)).collect();
            cache.inputs.push(act);
            cache.pre.push(z);
            cache.rows.push(b);
            act = next;
        }
        Ok(Forward {
            mu,
            sigma,
            value: act,
            cache,
        })
    }

    /// Backpropagates loss gradients given with respect to the outputs.
    pub fn backward(
        &self,
        cache: &Cache,
        g_mu: &[[f64; ACTION_DIM]],
        g_sigma: &[[f64; ACTION_DIM]],
        g_value: &[f64],
    ) -> Backward {
        let b = cache.batch;
        let s = self.cfg.leaky_slope;
        let n = self.layers.len();
        let mut grads: Vec<Option<LinearGrad>> = vec![None; n];
        let mut signals: Vec<Vec<f64>> = vec![Vec::new(); n];

        // Policy head, output to input.
        let t = &cache.policy_t;
        let mut gz = vec![0.0; b * POLICY_OUT];
        for r in 0..b {
            for k in 0..ACTION_DIM {
                let tm = t[r * POLICY_OUT + k];
                let ts = t[r * POLICY_OUT + ACTION_DIM + k];
                gz[r * POLICY_OUT + k] = g_mu[r][k] * self.cfg.action_scale[k] * (1.0 - tm * tm);
                gz[r * POLICY_OUT + ACTION_DIM + k] = g_sigma[r][k] * sigmoid(ts) * (1.0 - ts * ts);
            }
        }
        let pl = self.policy_layers();
        let mut g_head = Vec::new();
        for i in pl.clone().rev() {
            let l = &self.layers[i];
            grads[i] = Some(l.grads(&cache.inputs[i], &gz, b));
            let gx = l.input_grad(&gz, b);
            signals[i] = core::mem::take(&mut gz);
            if i == pl.start {
                g_head = gx;
            } else {
                let a = &cache.inputs[i];
                gz = gx.iter().zip(a).map(|(g, y)| g * (1.0 - y * y)).collect();
            }
        }

        // Value head.
        let vl = self.value_layers();
        let last = n - 1;
        let mut gz: Vec<f64> = (0..b)
            .map(|r| g_value[r] * leaky_d(cache.pre[last][r], s))
            .collect();
        for i in vl.clone().rev() {
            let l = &self.layers[i];
            grads[i] = Some(l.grads(&cache.inputs[i], &gz, b));
            let gx = l.input_grad(&gz, b);
            signals[i] = core::mem::take(&mut gz);
            if i == vl.start {
                for (a, g) in g_head.iter_mut().zip(&gx) {
                    *a += g;
                }
            } else {
                let z = &cache.pre[i - 1];
                gz = gx.iter().zip(z).map(|(g, z)| g * leaky_d(*z, s)).collect();
            }
        }

        // Trunk.
        let trunk = self.trunk_len();
        let mut gz: Vec<f64> = match self.cfg.mode {
            ObservationMode::Pixels => {
                let (f, p) = (self.cfg.feature_dim, STACK * PROPRIO_LEN);
                let z = &cache.pre[trunk - 1];
                let mut g = vec![0.0; b * f];
                for r in 0..b {
                    for j in 0..f {
                        let k = r * f + j;
                        g[k] = g_head[r * (f + p) + j] * cache.feature_slope[k] * leaky_d(z[k], s);
                    }
                }
                g
            }
            ObservationMode::LowDim => {
                let z = &cache.pre[trunk - 1];
                g_head.iter().zip(z).map(|(g, z)| g * leaky_d(*z, s)).collect()
            }
        };
        for i in (0..trunk).rev() {
            let l = &self.layers[i];
            let rows = cache.rows[i];
            grads[i] = Some(l.grads(&cache.inputs[i], &gz, rows));
            if i > 0 {
                let mut gx = l.input_grad(&gz, rows);
                if i < self.convs.len() {
                    gx = self.convs[i].col2im(&gx, b);
                }
                let z = &cache.pre[i - 1];
                signals[i] = core::mem::take(&mut gz);
                gz = gx.iter().zip(z).map(|(g, z)| g * leaky_d(*z, s)).collect();
            } else {
                signals[i] = core::mem::take(&mut gz);
            }
        }
        Backward {
            grads: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
            signals,
        }
    }

    /// Folds a batch into the running statistics of both normalizers.
    pub fn update_normalizers(&mut self, inp: &NetInput) -> Result<(), NetError> {
        self.check(inp)?;
        self.input_norm.update(&inp.vector, inp.batch);
        if self.cfg.mode == ObservationMode::Pixels {
            let mut cache = self.empty_cache(inp.batch);
            let feat = self.pixel_features(inp, &mut cache);
            if let Some(n) = self.feature_norm.as_mut() {
                n.update(&feat, inp.batch);
            }
        }
        Ok(())
    }

    /// Parameters in layer order, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.w);
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn set_flat_params(&mut self, v: &[f64]) -> Result<(), NetError> {
        if v.len() != self.param_count() {
            return Err(NetError::Shape(format!("{} params, want {}", v.len(), self.param_count())));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.w.len(), l.b.len());
            l.w.copy_from_slice(&v[off..off + nw]);
            l.b.copy_from_slice(&v[off + nw..off + nw + nb]);
            off += nw + nb;
        }
        Ok(())
    }

    pub fn apply_update(&mut self, step: &[LinearGrad], scale: f64) {
        for (l, d) in self.layers.iter_mut().zip(step) {
            for (w, g) in l.w.iter_mut().zip(&d.w) {
                *w += scale * g;
            }
            for (b, g) in l.b.iter_mut().zip(&d.b) {
                *b += scale * g;
            }
        }
    }
}

/// Read-only access to an observation's network input, for single samples.
pub fn single_input(o: &Observation) -> NetInput {
    NetInput::from_observations(core::iter::once(o))
}
