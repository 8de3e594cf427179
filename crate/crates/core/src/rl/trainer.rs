//! Synchronous multi-worker rollout collection and the update step.
//!
//! Each iteration every worker runs `k` steps against the same parameter
//! snapshot, then one update is computed from the joint batch. Workers own
//! their environment and RNG stream, so results do not depend on whether
//! they run sequentially or on threads.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gae::{gae, GaeConfig};
use super::kfac::{Kfac, KfacConfig, KfacError};
use super::loss::{a2c_loss, fisher_sample_grads, LossConfig};
use crate::behavior::log::{header_for, step_record, EpisodeLog, StepRecord};
use crate::env::{DoneReason, Env, EnvError, EpisodeConfig, Observation, ToolPolicy};
use crate::hash::{hash_f64_blocks, Digest32};
use crate::net::{single_input, NetError, NetInput, PolicyValueNet, ACTION_DIM};
use crate::physics::{ToolKind, World};
use crate::reward::{Predicates, RewardConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub workers: usize,
    /// Gives each tool kind an equal share of the workers.
    pub tool_balanced: bool,
    /// Multiplies rewards before advantage estimation. Logged episode
    /// rewards stay unscaled.
    pub reward_scale: f64,
    pub gae: GaeConfig,
    pub loss: LossConfig,
    pub kfac: KfacConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            workers: 12,
            tool_balanced: true,
            reward_scale: 1.0,
            gae: GaeConfig::default(),
            loss: LossConfig::default(),
            kfac: KfacConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("worker {0} sampled from a different parameter snapshot")]
    Desync(usize),
    #[error("non-finite loss or parameters after update {0}")]
    NonFinite(u64),
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.workers == 0 {
            return Err(TrainError::Config("need at least one worker"));
        }
        if self.tool_balanced && self.workers % 4 != 0 {
            return Err(TrainError::Config("tool-balanced training needs a worker count divisible by 4"));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return Err(TrainError::Config("reward_scale must be positive"));
        }
        self.gae.validate().map_err(TrainError::Config)?;
        self.kfac.validate().map_err(TrainError::Config)?;
        Ok(())
    }
}

/// Outcome of one finished episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    /// Global index, assigned in worker order at each update.
    pub index: u64,
    pub worker: usize,
    pub seed: u64,
    pub tool_kind: ToolKind,
    pub reward: f64,
    pub length: u32,
    pub success: bool,
    /// Union of the predicates seen over the episode.
    pub reached: Predicates,
    pub update: u64,
}

#[derive(Debug, Clone)]
pub struct WorkerRollout {
    pub worker: usize,
    pub snapshot: Digest32,
    pub observations: Vec<Observation>,
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: f64,
    pub finished: Vec<EpisodeSummary>,
    /// Logs of finished episodes when recording is on.
    pub logs: Vec<EpisodeLog>,
}

pub fn param_hash(net: &PolicyValueNet) -> Digest32 {
    hash_f64_blocks(net.layers.iter().flat_map(|l| [&l.w[..], &l.b[..]]))
}

#[derive(Debug, Clone)]
pub struct Worker {
    pub id: usize,
    env: Env,
    obs: Observation,
    rng: ChaCha8Rng,
    seed: u64,
    ep_reward: f64,
    ep_reached: Predicates,
    record: Option<Vec<StepRecord>>,
}

impl Worker {
    pub fn new(
        id: usize,
        world: World,
        episode: EpisodeConfig,
        reward: RewardConfig,
        seed: u64,
    ) -> Result<Self, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64 + 1);
        let ep_seed = rng.random();
        let (env, obs) = Env::reset(world, episode, reward, ep_seed)?;
        Ok(Self {
            id,
            env,
            obs,
            rng,
            seed: ep_seed,
            ep_reward: 0.0,
            ep_reached: Predicates::default(),
            record: None,
        })
    }

    /// Turns per-step trajectory recording on or off (from the next step).
    pub fn set_recording(&mut self, on: bool) {
        self.record = on.then(Vec::new);
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Runs `k` steps, sampling actions from `net`.
    pub fn collect(&mut self, net: &PolicyValueNet, k: usize) -> Result<WorkerRollout, TrainError> {
        let mut out = WorkerRollout {
            worker: self.id,
            snapshot: param_hash(net),
            observations: Vec::with_capacity(k),
            actions: Vec::with_capacity(k),
            log_probs: Vec::with_capacity(k),
            rewards: Vec::with_capacity(k),
            values: Vec::with_capacity(k),
            dones: Vec::with_capacity(k),
            bootstrap: 0.0,
            finished: Vec::new(),
            logs: Vec::new(),
        };
        for _ in 0..k {
            let f = net.forward(&single_input(&self.obs))?;
            let pi = f.policy(0);
            let a = pi.sample(&mut self.rng);
            let r = self.env.step(a)?;
            if let Some(rec) = self.record.as_mut() {
                rec.push(step_record(&self.env, a, &r));
            }
            self.ep_reward += r.reward.value;
            self.ep_reached = Predicates(self.ep_reached.0 | r.reward.predicates.0);
            out.observations.push(core::mem::replace(&mut self.obs, r.observation));
            out.actions.push(a);
            out.log_probs.push(pi.log_prob(&a));
            out.rewards.push(r.reward.value);
            out.values.push(f.value[0]);
            out.dones.push(r.done);
            if r.done {
                out.finished.push(EpisodeSummary {
                    index: 0,
                    worker: self.id,
                    seed: self.seed,
                    tool_kind: self.env.spawn().tool_kind,
                    reward: self.ep_reward,
                    length: self.env.steps(),
                    success: r.reason == Some(DoneReason::Success),
                    reached: self.ep_reached,
                    update: 0,
                });
                if let Some(rec) = self.record.as_mut() {
                    let steps = core::mem::take(rec);
                    let header = header_for(&self.env, 0, self.seed, &steps, r.reason);
                    out.logs.push(EpisodeLog { header, steps });
                }
                self.seed = self.rng.random();
                self.obs = self.env.restart(self.seed)?;
                self.ep_reward = 0.0;
                self.ep_reached = Predicates::default();
            }
        }
        out.bootstrap = net.forward(&single_input(&self.obs))?.value[0];
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub update: u64,
    pub batch: usize,
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub eta: f64,
    pub predicted_kl: f64,
    /// Mean KL between the pre- and post-update policies on the batch.
    pub realized_kl: f64,
    pub mean_advantage: f64,
    pub mean_value: f64,
    pub inverses_refreshed: bool,
    /// Share of the step's curvature term from the value-head layers.
    pub value_share: f64,
    /// The step was skipped after a factor inversion failure.
    pub skipped: bool,
}

/// One update from the joint rollout of all workers.
pub fn update(
    net: &mut PolicyValueNet,
    kfac: &mut Kfac,
    rollouts: &[WorkerRollout],
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
    index: u64,
) -> Result<UpdateStats, TrainError> {
    let mut input = NetInput::default();
    let mut actions = Vec::new();
    let mut advantages = Vec::new();
    let mut targets = Vec::new();
    for r in rollouts {
        let mut values = r.values.clone();
        values.push(r.bootstrap);
        let rewards: Vec<f64> = r.rewards.iter().map(|x| x * cfg.reward_scale).collect();
        let (adv, tgt) = gae(&rewards, &values, &r.dones, cfg.gae.gamma, cfg.gae.lambda);
        advantages.extend(adv);
        targets.extend(tgt);
        actions.extend_from_slice(&r.actions);
        for o in &r.observations {
            input.push(o);
        }
    }
    net.update_normalizers(&input)?;
    let f = net.forward(&input)?;
    let loss = a2c_loss(&f, &actions, &advantages, &targets, &cfg.loss);
    if !loss.total.is_finite() {
        return Err(TrainError::NonFinite(index));
    }
    let grads = net.backward(&f.cache, &loss.g_mu, &loss.g_sigma, &loss.g_value).grads;
    let (gm, gs, gv) = fisher_sample_grads(&f, rng);
    let fisher = net.backward(&f.cache, &gm, &gs, &gv);
    for i in 0..net.layers.len() {
        kfac.accumulate(i, &f.cache.inputs[i], &fisher.signals[i], f.cache.rows[i], input.batch);
    }
    let b = input.batch as f64;
    let mut stats = UpdateStats {
        update: index,
        batch: input.batch,
        loss: loss.total,
        policy_loss: loss.policy,
        value_loss: loss.value,
        entropy: loss.entropy,
        eta: 0.0,
        predicted_kl: 0.0,
        realized_kl: 0.0,
        mean_advantage: advantages.iter().sum::<f64>() / b,
        mean_value: f.value.iter().sum::<f64>() / b,
        inverses_refreshed: false,
        value_share: 0.0,
        skipped: false,
    };
    match kfac.step(&grads) {
        Ok(step) => {
            net.apply_update(&step.direction, -step.eta);
            stats.eta = step.eta;
            stats.predicted_kl = step.predicted_kl;
            stats.inverses_refreshed = step.inverses_refreshed;
            stats.value_share = step.layer_quad[net.value_layers()].iter().sum::<f64>() / step.quad;
        }
        Err(KfacError::NotPositiveDefinite(_)) | Err(KfacError::Degenerate(_)) => {
            kfac.reset();
            stats.skipped = true;
            return Ok(stats);
        }
    }
    if !net.is_finite() {
        return Err(TrainError::NonFinite(index));
    }
    let g = net.forward(&input)?;
    stats.realized_kl = (0..input.batch).map(|r| f.policy(r).kl(&g.policy(r))).sum::<f64>() / b;
    Ok(stats)
}

/// Results of one collect-and-update iteration.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub stats: UpdateStats,
    pub episodes: Vec<EpisodeSummary>,
    pub logs: Vec<EpisodeLog>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainerConfig,
    pub net: PolicyValueNet,
    pub kfac: Kfac,
    pub workers: Vec<Worker>,
    pub updates: u64,
    pub episodes: u64,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Worker `i` trains on tool kind `i mod 4` when balanced; worker RNG
    /// streams derive from `seed` and the update count (so a resumed run
    /// starts fresh, reproducible episodes).
    pub fn new(
        cfg: TrainerConfig,
        world: World,
        episode: EpisodeConfig,
        reward: RewardConfig,
        net: PolicyValueNet,
        seed: u64,
    ) -> Result<Self, TrainError> {
        Self::resume(cfg, world, episode, reward, net, None, 0, 0, seed)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn resume(
        cfg: TrainerConfig,
        world: World,
        episode: EpisodeConfig,
        reward: RewardConfig,
        net: PolicyValueNet,
        kfac: Option<Kfac>,
        updates: u64,
        episodes: u64,
        seed: u64,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if net.cfg.mode != episode.observation {
            return Err(TrainError::Config("network and episode observation modes differ"));
        }
        let base = seed ^ updates.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut workers = Vec::with_capacity(cfg.workers);
        for i in 0..cfg.workers {
            let mut ep = episode.clone();
            if cfg.tool_balanced {
                ep.tool_policy = ToolPolicy::Fixed(ToolKind::ALL[i % 4]);
            }
            workers.push(Worker::new(i, world.clone(), ep, reward.clone(), base)?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        rng.set_stream(0);
        let kfac = match kfac {
            Some(k) => k,
            None => Kfac::for_net(cfg.kfac.clone(), &net),
        };
        Ok(Self {
            cfg,
            net,
            kfac,
            workers,
            updates,
            episodes,
            rng,
        })
    }

    pub fn set_recording(&mut self, on: bool) {
        self.workers.iter_mut().for_each(|w| w.set_recording(on));
    }

    /// Sequential collection; the std crate runs the same per-worker calls
    /// on threads.
    pub fn collect(&mut self) -> Result<Vec<WorkerRollout>, TrainError> {
        let k = self.cfg.gae.k;
        let net = &self.net;
        self.workers.iter_mut().map(|w| w.collect(net, k)).collect()
    }

    /// Applies one update from rollouts collected against the current
    /// parameters.
    pub fn apply(&mut self, mut rollouts: Vec<WorkerRollout>) -> Result<Iteration, TrainError> {
        let snap = param_hash(&self.net);
        for r in &rollouts {
            if r.snapshot != snap {
                return Err(TrainError::Desync(r.worker));
            }
        }
        rollouts.sort_by_key(|r| r.worker);
        let index = self.updates;
        let stats = update(&mut self.net, &mut self.kfac, &rollouts, &self.cfg, &mut self.rng, index)?;
        self.updates += 1;
        let mut episodes = Vec::new();
        let mut logs = Vec::new();
        for r in &mut rollouts {
            for (j, e) in r.finished.iter().enumerate() {
                let mut e = *e;
                e.index = self.episodes;
                e.update = index;
                self.episodes += 1;
                if let Some(mut l) = r.logs.get(j).cloned() {
                    l.header.episode = e.index;
                    logs.push(l);
                }
                episodes.push(e);
            }
        }
        Ok(Iteration { stats, episodes, logs })
    }

    pub fn iterate(&mut self) -> Result<Iteration, TrainError> {
        let r = self.collect()?;
        self.apply(r)
    }
}

/// Runs one full evaluation episode. `deterministic` acts at the mean.
pub fn run_episode(
    net: &PolicyValueNet,
    env: &mut Env,
    seed: u64,
    rng: &mut ChaCha8Rng,
    deterministic: bool,
    index: u64,
) -> Result<EpisodeLog, TrainError> {
    let mut obs = env.restart(seed)?;
    let mut steps = Vec::new();
    loop {
        let f = net.forward(&single_input(&obs))?;
        let pi = f.policy(0);
        let a = if deterministic { pi.mu } else { pi.sample(rng) };
        let r = env.step(a)?;
        steps.push(step_record(env, a, &r));
        obs = r.observation.clone();
        if r.done {
            let header = header_for(env, index, seed, &steps, r.reason);
            return Ok(EpisodeLog { header, steps });
        }
    }
}
