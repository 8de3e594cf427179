//! Evaluation episodes from a checkpoint.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use toolrl_core::behavior::{summarize, EpisodeLog, ToolStats};
use toolrl_core::env::{Env, ToolPolicy};
use toolrl_core::physics::ToolKind;
use toolrl_core::rl::run_episode;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::logio::write_logs;
use crate::manifest::RunManifest;
use crate::train::world_for;

pub const EVAL_LOGS: &str = "trajectories.jsonl";
pub const EVAL_SUMMARY: &str = "summary.json";

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub episodes: u64,
    pub tool: Option<ToolKind>,
    /// Act at the policy mean instead of sampling.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub config_hash: String,
    pub checkpoint_updates: u64,
    pub episodes: u64,
    pub deterministic: bool,
    pub tools: Vec<ToolStats>,
}

/// Episode `i` uses reset seed `cfg.seed + i`; its action noise comes from
/// an independent stream keyed by the same seed.
pub fn evaluate(cfg: &RunConfig, ckpt: &Path, opts: &EvalOptions) -> Result<(Vec<EpisodeLog>, u64)> {
    if opts.episodes == 0 {
        return Err(Error::Usage("need at least one evaluation episode".into()));
    }
    let ck = checkpoint::load(ckpt, &cfg.network, &cfg.trainer.kfac)?;
    let mut episode = cfg.episode.clone();
    if let Some(k) = opts.tool {
        episode.tool_policy = ToolPolicy::Fixed(k);
    }
    let (mut env, _) = Env::reset(world_for(cfg)?, episode, cfg.reward.clone(), cfg.seed).map_err(Error::runtime)?;
    let mut logs = Vec::with_capacity(opts.episodes as usize);
    for i in 0..opts.episodes {
        let seed = cfg.seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let log = run_episode(&ck.net, &mut env, seed, &mut rng, opts.deterministic, i).map_err(Error::runtime)?;
        logs.push(log);
    }
    Ok((logs, ck.updates))
}

pub fn eval_cmd(cfg: &RunConfig, ckpt: &Path, opts: &EvalOptions, out: &Path) -> Result<EvalSummary> {
    let (logs, updates) = evaluate(cfg, ckpt, opts)?;
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    write_logs(&out.join(EVAL_LOGS), &logs)?;
    let (_, stats) = summarize(&logs, &cfg.analysis);
    let summary = EvalSummary {
        config_hash: cfg.hash(),
        checkpoint_updates: updates,
        episodes: opts.episodes,
        deterministic: opts.deterministic,
        tools: stats.tools,
    };
    let p = out.join(EVAL_SUMMARY);
    let text = serde_json::to_string_pretty(&summary).map_err(Error::runtime)?;
    std::fs::write(&p, text + "\n").map_err(Error::io(&p))?;
    let mut m = RunManifest::new("eval", cfg.hash());
    m.add(out, EVAL_LOGS, "trajectories")?;
    m.add(out, EVAL_SUMMARY, "stats")?;
    m.write(out)?;
    Ok(summary)
}
