//! Re-simulation of logged episodes and frame dumps.
//!
//! The whole episode is re-simulated and audited before anything is
//! written; frames go to a staging directory that is renamed into place
//! only once every frame is on disk.

use std::path::{Path, PathBuf};

use toolrl_core::behavior::EpisodeLog;
use toolrl_core::env::render::{render_scene, Layers};
use toolrl_core::env::{Env, IMAGE_HEIGHT, IMAGE_WIDTH};
use toolrl_core::physics::WorldState;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::image::{strip, strip_indices, write_ppm};
use crate::logio::read_logs;
use crate::train::world_for;

pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    /// Header episode index to replay; `None` replays every episode.
    pub episode: Option<u64>,
    /// Pixel upscale of the dumped frames relative to the policy camera.
    pub scale: usize,
    /// Frames in the strip image (0 = no strip).
    pub strip_frames: usize,
    /// Audit only; write nothing.
    pub check_only: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            episode: None,
            scale: 4,
            strip_frames: 6,
            check_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub episode: u64,
    pub frames: usize,
    pub max_divergence: f64,
    pub dir: Option<PathBuf>,
}

/// Re-simulates `log` and returns the visited states (initial state
/// first) and the largest geometry divergence from the log.
pub fn resimulate(cfg: &RunConfig, log: &EpisodeLog) -> Result<(Vec<WorldState>, f64)> {
    let h = &log.header;
    if h.dt != cfg.episode.dt || h.task != cfg.reward.task {
        return Err(Error::Integrity(format!(
            "episode {}: log dt/task differ from the config",
            h.episode
        )));
    }
    let (mut env, _) = Env::from_spawn(world_for(cfg)?, cfg.episode.clone(), cfg.reward.clone(), h.spawn);
    let mut states = vec![env.state().clone()];
    let mut worst = 0.0f64;
    for (i, s) in log.steps.iter().enumerate() {
        let r = env.step(s.action).map_err(|e| {
            Error::Integrity(format!("episode {}: step {} failed on replay: {e}", h.episode, s.tick))
        })?;
        let d = r.info.max_abs_diff(&s.geometry);
        worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        if !(d <= TOLERANCE) {
            return Err(Error::Integrity(format!(
                "episode {}: geometry diverges by {d:.3e} at step {}",
                h.episode, s.tick
            )));
        }
        let last = i + 1 == log.steps.len();
        if r.done != last {
            return Err(Error::Integrity(format!(
                "episode {}: replay ends at step {} but the log has {}",
                h.episode,
                s.tick,
                log.steps.len()
            )));
        }
        states.push(env.state().clone());
    }
    Ok((states, worst))
}

fn write_frames(cfg: &RunConfig, log: &EpisodeLog, states: &[WorldState], dir: &Path, opts: &ReplayOptions) -> Result<()> {
    let world = world_for(cfg)?;
    let palette = &cfg.episode.palette;
    let (w, h) = (IMAGE_WIDTH * opts.scale.max(1), IMAGE_HEIGHT * opts.scale.max(1));
    let staging = dir.with_extension("partial");
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(Error::io(&staging))?;
    }
    std::fs::create_dir_all(&staging).map_err(Error::io(&staging))?;
    let result = (|| {
        let frames: Vec<_> = states.iter().map(|s| render_scene(&world, s, palette, w, h, Layers::ALL)).collect();
        for (i, f) in frames.iter().enumerate() {
            write_ppm(&staging.join(format!("frame-{i:04}.ppm")), f)?;
        }
        if opts.strip_frames > 0 {
            let pick: Vec<_> = strip_indices(frames.len(), opts.strip_frames).into_iter().map(|i| &frames[i]).collect();
            write_ppm(&staging.join("strip.ppm"), &strip(&pick, 2, [255, 255, 255]))?;
        }
        let p = staging.join("episode.json");
        let text = serde_json::to_string_pretty(&log.header).map_err(Error::runtime)?;
        std::fs::write(&p, text + "\n").map_err(Error::io(&p))
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::rename(&staging, dir).map_err(Error::io(dir))
}

pub fn replay_cmd(cfg: &RunConfig, log_path: &Path, out: &Path, opts: &ReplayOptions) -> Result<Vec<ReplayReport>> {
    let logs = read_logs(log_path).map_err(|e| Error::Integrity(format!("{}: {e}", log_path.display())))?;
    let selected: Vec<&EpisodeLog> = match opts.episode {
        Some(n) => logs.iter().filter(|l| l.header.episode == n).collect(),
        None => logs.iter().collect(),
    };
    if selected.is_empty() {
        return Err(Error::Usage(format!("{}: no matching episode", log_path.display())));
    }
    // Audit everything before the first frame is written.
    let audited: Vec<_> = selected
        .iter()
        .map(|l| resimulate(cfg, l).map(|r| (*l, r)))
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for (log, (states, worst)) in audited {
        let dir = (!opts.check_only).then(|| out.join(format!("episode-{:06}", log.header.episode)));
        if let Some(d) = &dir {
            std::fs::create_dir_all(out).map_err(Error::io(out))?;
            write_frames(cfg, log, &states, d, opts)?;
        }
        reports.push(ReplayReport {
            episode: log.header.episode,
            frames: states.len(),
            max_divergence: worst,
            dir,
        });
    }
    Ok(reports)
}
