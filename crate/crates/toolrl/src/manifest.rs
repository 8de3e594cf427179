//! `manifest.json`: what a command produced and from which config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toolrl_core::hash::{hash_bytes, to_hex};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub kind: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    /// RFC 3339, UTC.
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<Artifact>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn file_sha256(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok((to_hex(&hash_bytes(&bytes)), bytes.len() as u64))
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.into(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").into(),
            started: now(),
            finished: String::new(),
            artifacts: Vec::new(),
        }
    }

    /// Hashes `dir/rel` and records it, replacing an earlier entry for the
    /// same path.
    pub fn add(&mut self, dir: &Path, rel: impl Into<PathBuf>, kind: &str) -> Result<()> {
        let rel = rel.into();
        let (sha256, bytes) = file_sha256(&dir.join(&rel))?;
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(Artifact {
            path: rel,
            kind: kind.into(),
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.finished = now();
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(Error::runtime)?;
        std::fs::write(&path, text + "\n").map_err(Error::io(&path))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(Error::io(&path))?;
        serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))
    }

    /// Re-hashes every artifact; the first mismatch or missing file is an
    /// integrity error.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let p = dir.join(&a.path);
            let (sha, _) = file_sha256(&p).map_err(|_| Error::Integrity(format!("{} is missing", p.display())))?;
            if sha != a.sha256 {
                return Err(Error::Integrity(format!("{} does not match its manifest hash", p.display())));
            }
        }
        Ok(())
    }
}
