//! Behavior report over a directory of trajectory logs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use toolrl_core::behavior::{report, summarize, BehaviorLabel, EpisodeLog, Rules, SummaryStats};
use toolrl_core::physics::ToolKind;

use crate::error::{Error, Result};
use crate::logio::{read_logs, LogError};
use crate::manifest::RunManifest;

pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeRow {
    pub file: String,
    pub episode: u64,
    pub tool_kind: ToolKind,
    pub success: bool,
    pub label: BehaviorLabel,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisRecord {
    pub files: usize,
    pub skipped: Vec<String>,
    pub stats: SummaryStats,
    pub episodes: Vec<EpisodeRow>,
}

/// `*.jsonl` files in `input` (sorted by name), or `input` itself when it
/// is a file.
pub fn log_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut v: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(Error::io(input))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    v.sort();
    Ok(v)
}

/// Reads every log file; unreadable files produce a warning and are left
/// out.
pub fn collect_logs(input: &Path) -> Result<(Vec<(String, EpisodeLog)>, Vec<String>)> {
    let mut logs = Vec::new();
    let mut warnings = Vec::new();
    for f in log_files(input)? {
        let name = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        match read_logs(&f) {
            Ok(ls) => logs.extend(ls.into_iter().map(|l| (name.clone(), l))),
            Err(e @ LogError::Version { .. }) => warnings.push(format!("{name}: {e}; skipped")),
            Err(e) => warnings.push(format!("{name}: {e}; skipped")),
        }
    }
    Ok((logs, warnings))
}

pub fn analyze(input: &Path, rules: &Rules) -> Result<(String, AnalysisRecord)> {
    rules.validate().map_err(|e| Error::Config(format!("[analysis] {e}")))?;
    let (named, skipped) = collect_logs(input)?;
    if named.is_empty() {
        return Err(Error::Runtime(format!("{}: no parseable trajectory logs", input.display())));
    }
    let files = {
        let mut f: Vec<&str> = named.iter().map(|(n, _)| n.as_str()).collect();
        f.dedup();
        f.len()
    };
    let logs: Vec<EpisodeLog> = named.iter().map(|(_, l)| l.clone()).collect();
    let (labels, stats) = summarize(&logs, rules);
    let episodes = named
        .iter()
        .zip(labels)
        .map(|((file, l), label)| EpisodeRow {
            file: file.clone(),
            episode: l.header.episode,
            tool_kind: l.header.tool_kind,
            success: l.header.success,
            label,
        })
        .collect();
    let text = report(&stats);
    Ok((
        text,
        AnalysisRecord {
            files,
            skipped,
            stats,
            episodes,
        },
    ))
}

pub fn analyze_cmd(input: &Path, rules: &Rules, config_hash: String, out: &Path) -> Result<AnalysisRecord> {
    let (text, record) = analyze(input, rules)?;
    for w in &record.skipped {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    let p = out.join(REPORT_TXT);
    std::fs::write(&p, &text).map_err(Error::io(&p))?;
    let p = out.join(REPORT_JSON);
    let json = serde_json::to_string_pretty(&record).map_err(Error::runtime)?;
    std::fs::write(&p, json + "\n").map_err(Error::io(&p))?;
    let mut m = RunManifest::new("analyze", config_hash);
    m.add(out, REPORT_TXT, "report")?;
    m.add(out, REPORT_JSON, "report")?;
    m.write(out)?;
    Ok(record)
}
