//! Geometric behavior detectors over trajectory logs.
//!
//! Every detector reads positions, contacts and grip state only, never the
//! rendered frames. Indices below are 0-based step positions; evidence is
//! reported in 1-based ticks.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::log::{EpisodeLog, StepRecord};
use crate::math::Vec2;
use crate::physics::{ToolKind, ToolPart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "Hook-Drag")]
    HookDrag,
    #[serde(rename = "Act-Like-I")]
    ActLikeI,
    Maneuver,
    #[serde(rename = "Wide-Sweep")]
    WideSweep,
    Hitting,
    Throwing,
    Correcting,
    Other,
}

impl Tag {
    pub const ALL: [Tag; 8] = [
        Tag::HookDrag,
        Tag::ActLikeI,
        Tag::Maneuver,
        Tag::WideSweep,
        Tag::Hitting,
        Tag::Throwing,
        Tag::Correcting,
        Tag::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tag::HookDrag => "Hook-Drag",
            Tag::ActLikeI => "Act-Like-I",
            Tag::Maneuver => "Maneuver",
            Tag::WideSweep => "Wide-Sweep",
            Tag::Hitting => "Hitting",
            Tag::Throwing => "Throwing",
            Tag::Correcting => "Correcting",
            Tag::Other => "Other",
        }
    }

    pub fn index(self) -> usize {
        Tag::ALL.iter().position(|&t| t == self).unwrap_or(0)
    }

    /// Whether the tag can apply to episodes with this tool.
    pub fn applies_to(self, kind: ToolKind) -> bool {
        match self {
            Tag::ActLikeI | Tag::Maneuver => kind.is_l(),
            Tag::WideSweep => kind == ToolKind::I,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rules {
    /// Minimum sustained tip contact for Hook-Drag, steps.
    pub contact_steps: u32,
    /// Maximum contact duration of a hit, steps.
    pub hit_steps: u32,
    /// Minimum object speed right after a hit, m/s.
    pub hit_speed: f64,
    /// Minimum tool kinetic energy at release for a throw, J.
    pub throw_energy: f64,
    /// Object-target distance increase that counts as a correction, m.
    pub correct_distance: f64,
    /// How far the I tip must pass the object before contact, m.
    pub sweep_margin: f64,
    /// Slack for monotonicity and sign tests, m.
    pub tolerance: f64,
    /// A contact within this distance of the end-effector is a tip contact, m.
    pub tip_reach: f64,
}

impl Default for Rules {
    fn default() -> Self {
        Self {
            contact_steps: 20,
            hit_steps: 5,
            hit_speed: 0.5,
            throw_energy: 0.01,
            correct_distance: 0.05,
            sweep_margin: 0.08,
            tolerance: 0.005,
            tip_reach: 0.08,
        }
    }
}

impl Rules {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.contact_steps == 0 || self.hit_steps == 0 {
            return Err("step thresholds must be at least 1");
        }
        let nonneg = [
            self.hit_speed,
            self.throw_energy,
            self.correct_distance,
            self.sweep_margin,
            self.tolerance,
            self.tip_reach,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("distance, speed and energy thresholds must be finite and >= 0");
        }
        Ok(())
    }
}

/// Why a tag was assigned: the step range (1-based ticks, inclusive) and
/// the measured quantity that crossed its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub tag: Tag,
    pub start: u32,
    pub end: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorLabel {
    /// Sorted in [`Tag::ALL`] order.
    pub tags: Vec<Tag>,
    pub evidence: Vec<Evidence>,
}

impl BehaviorLabel {
    pub fn has(&self, t: Tag) -> bool {
        self.tags.contains(&t)
    }
}

fn target_distance(s: &StepRecord) -> f64 {
    s.geometry.p_o.distance(s.geometry.p_t)
}

/// Maximal runs of consecutive steps where `f` holds, inclusive bounds.
fn runs(n: usize, f: impl Fn(usize) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..n {
        match (f(i), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, n - 1));
    }
    out
}

fn evidence(tag: Tag, start: usize, end: usize, value: f64) -> Evidence {
    Evidence {
        tag,
        start: start as u32 + 1,
        end: end as u32 + 1,
        value,
    }
}

fn is_tip_contact(s: &StepRecord, rules: &Rules) -> bool {
    s.contacts.iter().any(|c| c.point.distance(s.geometry.p_e) <= rules.tip_reach)
}

fn hook_drag(steps: &[StepRecord], rules: &Rules) -> Option<Evidence> {
    let n = steps.len();
    let d: Vec<f64> = steps.iter().map(target_distance).collect();
    runs(n, |i| is_tip_contact(&steps[i], rules))
        .into_iter()
        .filter(|&(s, e)| e + 1 - s >= rules.contact_steps as usize)
        .find(|&(s, _)| (s..n - 1).all(|i| d[i + 1] <= d[i] + rules.tolerance))
        .map(|(s, e)| evidence(Tag::HookDrag, s, e, (e + 1 - s) as f64))
}

fn first_contact(steps: &[StepRecord]) -> Option<usize> {
    steps.iter().position(|s| !s.contacts.is_empty())
}

/// Signed offset of the object from the hook line through the handle
/// midpoint (the sign of the tip-direction/bearing angle).
fn hook_offset(s: &StepRecord) -> Option<f64> {
    s.hook_direction.map(|h| h.cross(s.geometry.p_o - s.geometry.p_h))
}

fn maneuver(steps: &[StepRecord], f: usize, rules: &Rules) -> Option<Evidence> {
    let mut last: Option<(usize, f64)> = None;
    let mut flips = 0;
    let mut first = None;
    for (i, s) in steps[..f].iter().enumerate() {
        let Some(o) = hook_offset(s) else { continue };
        if o.abs() <= rules.tolerance {
            continue;
        }
        match last {
            Some((_, prev)) if prev.signum() != o.signum() => {
                flips += 1;
                first.get_or_insert(i);
            }
            None => {}
            _ => {}
        }
        last = Some((i, o));
    }
    first.map(|i| evidence(Tag::Maneuver, 0, i, flips as f64))
}

fn act_like_i(steps: &[StepRecord], f: usize) -> Option<Evidence> {
    let s = &steps[f];
    let h = s.hook_direction?;
    let away = h.dot(s.geometry.p_o - s.geometry.p_h);
    let handle_first = s.contacts.first().is_some_and(|c| c.part == ToolPart::Handle);
    (handle_first && away < 0.0).then(|| evidence(Tag::ActLikeI, f, f, away))
}

fn wide_sweep(steps: &[StepRecord], f: usize, rules: &Rules) -> Option<Evidence> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in steps[..f].iter().enumerate() {
        let g = &s.geometry;
        let axis = g.p_e - g.p_h;
        let len = axis.length();
        if len <= 0.0 {
            continue;
        }
        let a = axis * (1.0 / len);
        let ahead = (g.p_o - g.p_h).dot(a);
        let over = (g.p_e - g.p_o).dot(a);
        if ahead >= 0.0 && over > rules.sweep_margin && best.is_none_or(|(_, b)| over > b) {
            best = Some((i, over));
        }
    }
    best.map(|(i, v)| evidence(Tag::WideSweep, i, i, v))
}

fn hitting(steps: &[StepRecord], rules: &Rules) -> Option<Evidence> {
    let n = steps.len();
    let &(s, e) = runs(n, |i| !steps[i].contacts.is_empty()).last()?;
    if e + 1 >= n || e + 1 - s > rules.hit_steps as usize {
        return None;
    }
    let speed = steps[e + 1].object_velocity.length();
    (speed >= rules.hit_speed).then(|| evidence(Tag::Hitting, s, e, speed))
}

fn throwing(steps: &[StepRecord], rules: &Rules) -> Option<Evidence> {
    let n = steps.len();
    let r = (1..n).rev().find(|&i| steps[i - 1].holding && !steps[i].holding)?;
    let energy = steps[r].tool_energy;
    if energy <= rules.throw_energy || steps[r..].iter().any(|s| s.holding) {
        return None;
    }
    let c = (r..n).find(|&i| !steps[i].contacts.is_empty())?;
    Some(evidence(Tag::Throwing, r, c, energy))
}

fn correcting(steps: &[StepRecord], rules: &Rules) -> Option<Evidence> {
    let n = steps.len();
    let d: Vec<f64> = steps.iter().map(target_distance).collect();
    let rs = runs(n, |i| !steps[i].contacts.is_empty());
    for (k, &(s, _)) in rs.iter().enumerate() {
        let before = d[s.saturating_sub(1)];
        let until = rs.get(k + 1).map_or(n, |r| r.0);
        let (peak_i, peak) = (s..until)
            .map(|i| (i, d[i]))
            .fold((s, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        if peak - before > rules.correct_distance {
            return Some(evidence(Tag::Correcting, s, peak_i, peak - before));
        }
    }
    None
}

/// Runs every detector. Unsuccessful episodes get no tags; a successful one
/// with no detector firing is tagged Other. Maneuver takes precedence over
/// Act-Like-I.
pub fn classify_episode(log: &EpisodeLog, rules: &Rules) -> BehaviorLabel {
    let mut label = BehaviorLabel::default();
    let steps = &log.steps;
    if !log.header.success || steps.is_empty() {
        return label;
    }
    let kind = log.header.tool_kind;
    let mut found: Vec<Evidence> = Vec::new();
    found.extend(hook_drag(steps, rules));
    if let Some(f) = first_contact(steps) {
        if kind.is_l() {
            match maneuver(steps, f, rules) {
                Some(m) => found.push(m),
                None => found.extend(act_like_i(steps, f)),
            }
        }
        if kind == ToolKind::I {
            found.extend(wide_sweep(steps, f, rules));
        }
    }
    found.extend(hitting(steps, rules));
    found.extend(throwing(steps, rules));
    found.extend(correcting(steps, rules));
    if found.is_empty() {
        let n = steps.len();
        found.push(evidence(Tag::Other, 0, n - 1, 0.0));
    }
    found.sort_by_key(|e| e.tag);
    label.tags = found.iter().map(|e| e.tag).collect();
    label.evidence = found;
    label
}

/// Whether the object started above the arena midline.
pub fn starts_upper(log: &EpisodeLog) -> bool {
    let p: Vec2 = log.header.spawn.object;
    p.y > log.header.midline_y
}
