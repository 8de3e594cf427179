//! Trajectory logs and the behavior detectors run over them.

pub mod detect;
pub mod log;
pub mod summary;
pub mod synth;

pub use detect::{classify_episode, starts_upper, BehaviorLabel, Evidence, Rules, Tag};
pub use log::{EpisodeHeader, EpisodeLog, StepRecord, ToolContact, LOG_SCHEMA, LOG_VERSION};
pub use summary::{report, summarize, summarize_labeled, SummaryStats, TagStats, ToolStats};
