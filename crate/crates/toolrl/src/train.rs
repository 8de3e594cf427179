//! Training driver: threaded collection, stats streams, checkpoints.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.toml                resolved config
//! stats/episodes.jsonl       one EpisodeSummary per finished episode
//! stats/updates.jsonl        one UpdateStats per update
//! checkpoints/ckpt-NNNNNN.bin
//! checkpoints/latest.bin
//! trajectories/train.jsonl   when schedule.record_trajectories is set
//! manifest.json
//! ```
//!
//! Stats lines carry no timestamps, so two runs with the same config and
//! seed produce identical files regardless of the thread count.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toolrl_core::hash::Digest32;
use toolrl_core::net::PolicyValueNet;
use toolrl_core::physics::World;
use toolrl_core::rl::{EpisodeSummary, Trainer, WorkerRollout};

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::logio::{write_episode, write_jsonl};
use crate::manifest::RunManifest;

pub const LATEST: &str = "checkpoints/latest.bin";
pub const EPISODES: &str = "stats/episodes.jsonl";
pub const UPDATES: &str = "stats/updates.jsonl";
pub const TRAJECTORIES: &str = "trajectories/train.jsonl";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub resume: bool,
    /// Print a progress line every this many updates (0 = silent).
    pub progress_every: u64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub updates: u64,
    pub episodes: u64,
    /// Success flags of the episodes finished by this invocation.
    pub successes: Vec<bool>,
    pub checkpoint: PathBuf,
}

/// Collects one rollout per worker, spreading workers over `threads`
/// scoped threads. Results come back in worker order.
pub fn collect_parallel(t: &mut Trainer, threads: usize) -> Result<Vec<WorkerRollout>> {
    let k = t.cfg.gae.k;
    let threads = threads.clamp(1, t.workers.len().max(1));
    if threads == 1 {
        return t.collect().map_err(Error::runtime);
    }
    let net = &t.net;
    let chunk = t.workers.len().div_ceil(threads);
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = t
            .workers
            .chunks_mut(chunk)
            .map(|ws| s.spawn(move || ws.iter_mut().map(|w| w.collect(net, k)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("collector thread panicked")).collect()
    });
    results.into_iter().map(|r| r.map_err(Error::runtime)).collect()
}

pub fn world_for(cfg: &RunConfig) -> Result<World> {
    World::new(cfg.world.clone()).map_err(|e| Error::Config(format!("[world] {e}")))
}

fn open_stream(path: &Path, append: bool) -> Result<BufWriter<File>> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(Error::io(d))?;
    }
    let f = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(Error::io(path))?;
    Ok(BufWriter::new(f))
}

fn save_checkpoint(dir: &Path, t: &Trainer, config_hash: Digest32, manifest: &mut RunManifest) -> Result<PathBuf> {
    let ck = Checkpoint {
        config_hash,
        updates: t.updates,
        episodes: t.episodes,
        net: t.net.clone(),
        kfac: Some(t.kfac.clone()),
    };
    let name = format!("checkpoints/ckpt-{:06}.bin", t.updates);
    let path = dir.join(&name);
    std::fs::create_dir_all(dir.join("checkpoints")).map_err(Error::io(dir))?;
    checkpoint::save(&path, &ck)?;
    std::fs::copy(&path, dir.join(LATEST)).map_err(Error::io(dir.join(LATEST)))?;
    manifest.add(dir, name, "checkpoint")?;
    manifest.add(dir, LATEST, "checkpoint")?;
    Ok(path)
}

pub fn train(cfg: &RunConfig, dir: &Path, opts: &TrainOptions) -> Result<TrainSummary> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let config_hash = cfg.digest();
    let world = world_for(cfg)?;
    let mut manifest = if opts.resume {
        RunManifest::read(dir).unwrap_or_else(|_| RunManifest::new("train", cfg.hash()))
    } else {
        RunManifest::new("train", cfg.hash())
    };
    let mut trainer = if opts.resume {
        let ck = checkpoint::load(&dir.join(LATEST), &cfg.network, &cfg.trainer.kfac)?;
        if ck.config_hash != config_hash {
            eprintln!("warning: resuming with a config that differs from the checkpoint's");
        }
        Trainer::resume(
            cfg.trainer.clone(),
            world,
            cfg.episode.clone(),
            cfg.reward.clone(),
            ck.net,
            ck.kfac,
            ck.updates,
            ck.episodes,
            cfg.seed,
        )
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = PolicyValueNet::new(cfg.network.clone(), &mut rng).map_err(|e| Error::Config(format!("[network] {e}")))?;
        Trainer::new(cfg.trainer.clone(), world, cfg.episode.clone(), cfg.reward.clone(), net, cfg.seed)
    }
    .map_err(|e| Error::Config(format!("[trainer] {e}")))?;

    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml()).map_err(Error::io(&config_path))?;
    manifest.config_hash = cfg.hash();
    manifest.add(dir, "config.toml", "config")?;

    let record = cfg.schedule.record_trajectories;
    trainer.set_recording(record);
    let mut episodes_out = open_stream(&dir.join(EPISODES), opts.resume)?;
    let mut updates_out = open_stream(&dir.join(UPDATES), opts.resume)?;
    let mut traj_out = if record { Some(open_stream(&dir.join(TRAJECTORIES), opts.resume)?) } else { None };
    let threads = if cfg.schedule.threads == 0 { trainer.workers.len() } else { cfg.schedule.threads };

    let mut successes = Vec::new();
    let mut last_ckpt = None;
    let io = |p: &str| Error::io(dir.join(p));
    loop {
        let done_eps = trainer.episodes >= cfg.schedule.episodes;
        let done_upd = cfg.schedule.max_updates > 0 && trainer.updates >= cfg.schedule.max_updates;
        if done_eps || done_upd {
            break;
        }
        let rollouts = collect_parallel(&mut trainer, threads)?;
        let it = trainer.apply(rollouts).map_err(|e| match e {
            toolrl_core::rl::TrainError::NonFinite(u) => Error::Runtime(format!("non-finite parameters after update {u}")),
            e => Error::runtime(e),
        })?;
        write_jsonl(&mut updates_out, [&it.stats]).map_err(io(UPDATES))?;
        write_jsonl(&mut episodes_out, &it.episodes).map_err(io(EPISODES))?;
        if let Some(w) = traj_out.as_mut() {
            for l in &it.logs {
                write_episode(w, l).map_err(io(TRAJECTORIES))?;
            }
        }
        successes.extend(it.episodes.iter().map(|e: &EpisodeSummary| e.success));
        if opts.progress_every > 0 && trainer.updates % opts.progress_every == 0 {
            let w = &successes[successes.len().saturating_sub(100)..];
            let rate = if w.is_empty() { 0.0 } else { w.iter().filter(|&&s| s).count() as f64 / w.len() as f64 };
            eprintln!(
                "update {} episodes {} success(last {}) {:.1}% entropy {:.3} eta {:.2e}",
                trainer.updates,
                trainer.episodes,
                w.len(),
                100.0 * rate,
                it.stats.entropy,
                it.stats.eta
            );
        }
        let every = cfg.schedule.checkpoint_every;
        if every > 0 && trainer.updates % every == 0 {
            last_ckpt = Some(save_checkpoint(dir, &trainer, config_hash, &mut manifest)?);
        }
    }
    episodes_out.flush().map_err(io(EPISODES))?;
    updates_out.flush().map_err(io(UPDATES))?;
    if let Some(mut w) = traj_out {
        w.flush().map_err(io(TRAJECTORIES))?;
        manifest.add(dir, TRAJECTORIES, "trajectories")?;
    }
    let already = last_ckpt.as_ref().is_some_and(|_| cfg.schedule.checkpoint_every > 0 && trainer.updates % cfg.schedule.checkpoint_every == 0);
    let checkpoint = match (already, last_ckpt) {
        (true, Some(p)) => p,
        _ => save_checkpoint(dir, &trainer, config_hash, &mut manifest)?,
    };
    manifest.add(dir, EPISODES, "stats")?;
    manifest.add(dir, UPDATES, "stats")?;
    manifest.write(dir)?;
    Ok(TrainSummary {
        updates: trainer.updates,
        episodes: trainer.episodes,
        successes,
        checkpoint,
    })
}
