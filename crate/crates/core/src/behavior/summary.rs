//! Per-tool success statistics, behavior frequencies and the text report.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::detect::{classify_episode, starts_upper, BehaviorLabel, Rules, Tag};
use super::log::EpisodeLog;
use crate::physics::ToolKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolStats {
    pub tool_kind: ToolKind,
    pub episodes: u32,
    pub successes: u32,
    /// Percent.
    pub success_rate: f64,
    /// Over all episodes of this tool.
    pub mean_length: f64,
}

/// Count of one tag among one tool's successful episodes, split by the
/// object's starting half. Frequencies are percentages of the tool's
/// successful episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagStats {
    pub tool_kind: ToolKind,
    pub tag: Tag,
    pub count: u32,
    pub upper: u32,
    pub lower: u32,
    pub frequency: f64,
    pub upper_frequency: f64,
    pub lower_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub episodes: u32,
    pub tools: Vec<ToolStats>,
    /// One row per tool kind and applicable tag, in `ToolKind::ALL` then
    /// `Tag::ALL` order.
    pub behaviors: Vec<TagStats>,
}

fn percent(n: u32, d: u32) -> f64 {
    if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 }
}

pub fn summarize_labeled(logs: &[EpisodeLog], labels: &[BehaviorLabel]) -> SummaryStats {
    assert_eq!(logs.len(), labels.len());
    let mut tools = Vec::new();
    let mut behaviors = Vec::new();
    for kind in ToolKind::ALL {
        let idx: Vec<usize> = (0..logs.len()).filter(|&i| logs[i].header.tool_kind == kind).collect();
        let episodes = idx.len() as u32;
        let successes = idx.iter().filter(|&&i| logs[i].header.success).count() as u32;
        let total_len: u64 = idx.iter().map(|&i| logs[i].header.length as u64).sum();
        tools.push(ToolStats {
            tool_kind: kind,
            episodes,
            successes,
            success_rate: percent(successes, episodes),
            mean_length: if episodes == 0 { 0.0 } else { total_len as f64 / episodes as f64 },
        });
        for tag in Tag::ALL.into_iter().filter(|t| t.applies_to(kind)) {
            let (mut upper, mut lower) = (0, 0);
            for &i in &idx {
                if labels[i].has(tag) {
                    if starts_upper(&logs[i]) {
                        upper += 1;
                    } else {
                        lower += 1;
                    }
                }
            }
            behaviors.push(TagStats {
                tool_kind: kind,
                tag,
                count: upper + lower,
                upper,
                lower,
                frequency: percent(upper + lower, successes),
                upper_frequency: percent(upper, successes),
                lower_frequency: percent(lower, successes),
            });
        }
    }
    SummaryStats {
        episodes: logs.len() as u32,
        tools,
        behaviors,
    }
}

/// Classifies every log and aggregates.
pub fn summarize(logs: &[EpisodeLog], rules: &Rules) -> (Vec<BehaviorLabel>, SummaryStats) {
    let labels: Vec<BehaviorLabel> = logs.iter().map(|l| classify_episode(l, rules)).collect();
    let stats = summarize_labeled(logs, &labels);
    (labels, stats)
}

/// Fixed-width text tables: success per tool, then behavior frequencies per
/// tool with an upper/lower split and a totals row.
pub fn report(stats: &SummaryStats) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Success by tool ({} episodes)", stats.episodes);
    let _ = writeln!(s, "{:<10}{:>10}{:>10}{:>12}{:>14}", "tool", "episodes", "success", "rate %", "mean length");
    for t in &stats.tools {
        let _ = writeln!(
            s,
            "{:<10}{:>10}{:>10}{:>12.2}{:>14.2}",
            t.tool_kind.name(),
            t.episodes,
            t.successes,
            t.success_rate,
            t.mean_length
        );
    }
    let (e, k): (u32, u32) = stats.tools.iter().fold((0, 0), |a, t| (a.0 + t.episodes, a.1 + t.successes));
    let _ = writeln!(s, "{:<10}{:>10}{:>10}{:>12.2}", "total", e, k, percent(k, e));
    for kind in ToolKind::ALL {
        let rows: Vec<&TagStats> = stats.behaviors.iter().filter(|b| b.tool_kind == kind).collect();
        let succ = stats.tools.iter().find(|t| t.tool_kind == kind).map_or(0, |t| t.successes);
        let _ = writeln!(s);
        let _ = writeln!(s, "Behaviors, {} tool ({} successful)", kind.name(), succ);
        let _ = writeln!(
            s,
            "{:<12}{:>7}{:>7}{:>7}{:>10}{:>10}{:>10}",
            "behavior", "count", "upper", "lower", "total %", "upper %", "lower %"
        );
        for b in &rows {
            let _ = writeln!(
                s,
                "{:<12}{:>7}{:>7}{:>7}{:>10.2}{:>10.2}{:>10.2}",
                b.tag.name(),
                b.count,
                b.upper,
                b.lower,
                b.frequency,
                b.upper_frequency,
                b.lower_frequency
            );
        }
        let (c, u, l) = rows.iter().fold((0, 0, 0), |a, b| (a.0 + b.count, a.1 + b.upper, a.2 + b.lower));
        let _ = writeln!(s, "{:<12}{:>7}{:>7}{:>7}", "total", c, u, l);
    }
    s
}
