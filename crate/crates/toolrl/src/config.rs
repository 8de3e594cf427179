//! The run configuration file (TOML).
//!
//! Every block has complete defaults, so an empty file is valid. Unknown
//! keys are rejected. Command-line `--set block.key=value` overrides are
//! applied to the parsed table before deserialization, so they go through
//! the same checks as the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toolrl_core::behavior::Rules;
use toolrl_core::env::EpisodeConfig;
use toolrl_core::hash::{hash_bytes, to_hex, Digest32};
use toolrl_core::net::NetConfig;
use toolrl_core::physics::WorldConfig;
use toolrl_core::reward::RewardConfig;
use toolrl_core::rl::TrainerConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// Stop after this many finished training episodes.
    pub episodes: u64,
    /// Also stop after this many updates (0 = no limit).
    pub max_updates: u64,
    /// Write a checkpoint every this many updates (0 = only at the end).
    pub checkpoint_every: u64,
    /// Record per-step trajectory logs of training episodes.
    pub record_trajectories: bool,
    /// Collection threads (0 = one per worker).
    pub threads: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            episodes: 19_000,
            max_updates: 0,
            checkpoint_every: 500,
            record_trajectories: false,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub world: WorldConfig,
    pub episode: EpisodeConfig,
    pub reward: RewardConfig,
    pub network: NetConfig,
    pub trainer: TrainerConfig,
    pub schedule: Schedule,
    pub analysis: Rules,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            world: WorldConfig::default(),
            episode: EpisodeConfig::default(),
            reward: RewardConfig::default(),
            network: NetConfig::default(),
            trainer: TrainerConfig::default(),
            schedule: Schedule::default(),
            analysis: Rules::default(),
        }
    }
}

fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{s}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("override `{s}` has an empty key segment")));
    }
    // Parse the value as a TOML literal, falling back to a bare string.
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` is not a table")))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text plus overrides, then validates every block.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let cfg: RunConfig = RunConfig::deserialize(table).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(Error::io(p))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides).map_err(|e| match (e, path) {
            (Error::Config(m), Some(p)) => Error::Config(format!("{}: {m}", p.display())),
            (e, _) => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let field = |block: &str, m: String| Error::Config(format!("[{block}] {m}"));
        self.world.validate().map_err(|e| field("world", e.to_string()))?;
        self.episode.validate().map_err(|e| field("episode", e.to_string()))?;
        self.reward.validate().map_err(|e| field("reward", e.0.to_string()))?;
        toolrl_core::net::PolicyValueNet::zeros(self.network.clone()).map_err(|e| field("network", e.to_string()))?;
        if self.network.mode != self.episode.observation {
            return Err(field(
                "network",
                "mode must equal episode.observation".into(),
            ));
        }
        self.trainer.validate().map_err(|e| field("trainer", e.to_string()))?;
        self.analysis.validate().map_err(|e| field("analysis", e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, with the output directory
    /// blanked so relocating a run keeps its hash.
    pub fn digest(&self) -> Digest32 {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        hash_bytes(&serde_json::to_vec(&c).expect("config serializes"))
    }

    pub fn hash(&self) -> String {
        to_hex(&self.digest())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
