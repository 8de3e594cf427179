//! Trajectory log schema.
//!
//! A log file is line-delimited JSON: one [`EpisodeHeader`] line, then one
//! [`StepRecord`] line per control step, repeated per episode. `schema` and
//! `version` in the header identify the layout.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::{DoneReason, Env, Spawn, StepResult};
use crate::math::Vec2;
use crate::physics::{BodyId, ToolKind, ToolPart, OBJECT, TOOL};
use crate::reward::{Branch, Predicates, RewardTask};

pub const LOG_SCHEMA: &str = "toolrl-trajectory";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub schema: String,
    pub version: u32,
    pub episode: u64,
    pub seed: u64,
    pub tool_kind: ToolKind,
    pub spawn: Spawn,
    pub task: RewardTask,
    pub dt: f64,
    /// Height of the arena midline; objects starting above it are in the
    /// upper half.
    pub midline_y: f64,
    pub success: bool,
    pub length: u32,
    pub total_reward: f64,
}

/// A tool/object contact during one control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolContact {
    pub part: ToolPart,
    pub point: Vec2,
    pub normal_impulse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index within the episode.
    pub tick: u32,
    pub action: [f64; 4],
    pub geometry: crate::physics::TaskGeometry,
    pub opening: f64,
    /// Whether the grip weld holds the tool after the step.
    pub holding: bool,
    pub tool_angle: f64,
    pub tool_velocity: Vec2,
    pub tool_omega: f64,
    pub tool_energy: f64,
    /// World-frame hook direction of an L tool.
    pub hook_direction: Option<Vec2>,
    pub object_velocity: Vec2,
    pub contacts: Vec<ToolContact>,
    pub branch: Branch,
    pub predicates: Predicates,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    /// Header/step consistency: step count, tick order and the success flag.
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.header.schema != LOG_SCHEMA || self.header.version != LOG_VERSION {
            return Err("unknown log schema or version");
        }
        if self.steps.len() != self.header.length as usize {
            return Err("step count differs from header length");
        }
        if self.steps.iter().enumerate().any(|(i, s)| s.tick as usize != i + 1) {
            return Err("ticks are not consecutive from 1");
        }
        let last_terminal = self.steps.last().is_some_and(|s| s.branch == Branch::Terminal);
        if self.header.success != last_terminal {
            return Err("success flag disagrees with the final step");
        }
        Ok(())
    }
}

/// Builds the record of the step that produced `r`.
pub fn step_record(env: &Env, action: [f64; 4], r: &StepResult) -> StepRecord {
    let s = env.state();
    let tool = &s.bodies[TOOL];
    let contacts = s
        .contacts
        .iter()
        .filter(|c| c.involves(BodyId::Tool, BodyId::Object))
        .map(|c| {
            let part = if c.bodies.0 == BodyId::Tool { c.parts.0 } else { c.parts.1 };
            ToolContact {
                part: ToolPart::from_index(part),
                point: c.point,
                normal_impulse: c.normal_impulse,
            }
        })
        .collect();
    StepRecord {
        tick: env.steps(),
        action,
        geometry: r.info,
        opening: s.gripper.opening,
        holding: s.gripper.is_holding(),
        tool_angle: tool.angle,
        tool_velocity: tool.linear_velocity,
        tool_omega: tool.angular_velocity,
        tool_energy: tool.kinetic_energy(),
        hook_direction: env.world().hook_frame(s).map(|(d, _)| d),
        object_velocity: s.bodies[OBJECT].linear_velocity,
        contacts,
        branch: r.reward.branch,
        predicates: r.reward.predicates,
        reward: r.reward.value,
    }
}

pub fn header_for(env: &Env, episode: u64, seed: u64, steps: &[StepRecord], reason: Option<DoneReason>) -> EpisodeHeader {
    EpisodeHeader {
        schema: String::from(LOG_SCHEMA),
        version: LOG_VERSION,
        episode,
        seed,
        tool_kind: env.spawn().tool_kind,
        spawn: *env.spawn(),
        task: env.reward_config().task,
        dt: env.config().dt,
        midline_y: {
            let a = &env.world().config().arena;
            a.origin.y + 0.5 * a.height
        },
        success: reason == Some(DoneReason::Success),
        length: steps.len() as u32,
        total_reward: steps.iter().map(|s| s.reward).sum(),
    }
}
