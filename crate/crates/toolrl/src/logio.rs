//! Line-delimited JSON files: trajectory logs and the training stats stream.
//!
//! A trajectory file holds, per episode, one header line (the object with a
//! `schema` key) followed by exactly `length` step lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use toolrl_core::behavior::{EpisodeHeader, EpisodeLog, StepRecord, LOG_SCHEMA, LOG_VERSION};

use crate::error::{Error, Result};

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("log version {found} is not supported (expected {LOG_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_jsonl<T: Serialize>(w: &mut impl Write, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut *w, &it)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_episode(w: &mut impl Write, log: &EpisodeLog) -> std::io::Result<()> {
    write_jsonl(w, [&log.header])?;
    write_jsonl(w, &log.steps)
}

pub fn write_logs(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let f = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(f);
    for l in logs {
        write_episode(&mut w, l).map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn parse_logs(r: impl BufRead) -> Result<Vec<EpisodeLog>, LogError> {
    let mut out: Vec<EpisodeLog> = Vec::new();
    let mut remaining = 0usize;
    let mut last_line = 0;
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| LogError::Parse { line: n, msg };
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if v.get("schema").is_some() {
            if remaining > 0 {
                return Err(err(format!("header before the previous episode's {remaining} missing steps")));
            }
            if v["schema"] != LOG_SCHEMA {
                return Err(err(format!("unknown schema {}", v["schema"])));
            }
            let version = v["version"].as_u64().unwrap_or(0) as u32;
            if version != LOG_VERSION {
                return Err(LogError::Version { found: version });
            }
            let header: EpisodeHeader = serde_json::from_value(v).map_err(|e| err(e.to_string()))?;
            remaining = header.length as usize;
            out.push(EpisodeLog {
                header,
                steps: Vec::with_capacity(remaining),
            });
        } else {
            let Some(ep) = out.last_mut().filter(|_| remaining > 0) else {
                return Err(err("step line without an open episode".into()));
            };
            let step: StepRecord = serde_json::from_value(v).map_err(|e| err(e.to_string()))?;
            ep.steps.push(step);
            remaining -= 1;
        }
        if remaining == 0 {
            if let Some(ep) = out.last() {
                if ep.steps.len() == ep.header.length as usize {
                    ep.validate().map_err(|m| err(m.into()))?;
                }
            }
        }
    }
    if remaining > 0 {
        return Err(LogError::Parse {
            line: last_line,
            msg: format!("truncated: {remaining} steps missing from the last episode"),
        });
    }
    Ok(out)
}

pub fn read_logs(path: &Path) -> Result<Vec<EpisodeLog>, LogError> {
    parse_logs(BufReader::new(File::open(path)?))
}
