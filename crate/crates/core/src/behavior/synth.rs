//! Scripted synthetic trajectories with known behavior labels.
//!
//! Each scenario moves the tool and object kinematically so that exactly
//! the intended detectors fire, with random start positions, speeds and
//! durations plus sub-tolerance position noise. Used as the labeled fixture
//! suite for the detectors and the report golden file.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::detect::Tag;
use super::log::{EpisodeHeader, EpisodeLog, StepRecord, ToolContact, LOG_SCHEMA, LOG_VERSION};
use crate::env::Spawn;
use crate::math::{atan2, Vec2};
use crate::physics::{TaskGeometry, ToolKind, ToolPart};
use crate::reward::{compute_reward, RewardConfig, RewardTask};

const DT: f64 = 0.01;
const RADIUS: f64 = 0.03;
const TOOL_MASS: f64 = 0.1;
const MIDLINE: f64 = 0.5;
const MAX_STEPS: usize = 500;
/// Object-target distance below which the object is at the target.
const GOAL: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
struct Frame {
    p_h: Vec2,
    p_e: Vec2,
    p_o: Vec2,
    holding: bool,
    hook: Option<Vec2>,
    contact: Option<(ToolPart, Vec2)>,
}

struct Script {
    kind: ToolKind,
    cur: Frame,
    frames: Vec<Frame>,
    rng: ChaCha8Rng,
}

impl Script {
    fn new(kind: ToolKind, p_o: Vec2, p_h: Vec2, p_e: Vec2, hook: Option<Vec2>, rng: ChaCha8Rng) -> Self {
        Self {
            kind,
            cur: Frame {
                p_h,
                p_e,
                p_o,
                holding: true,
                hook: if kind.is_l() { hook } else { None },
                contact: None,
            },
            frames: Vec::new(),
            rng,
        }
    }

    fn emit(&mut self) {
        let mut f = self.cur;
        f.p_o += Vec2::new(self.rng.random_range(-5e-4..5e-4), self.rng.random_range(-5e-4..5e-4));
        self.frames.push(f);
        self.cur.contact = None;
    }

    /// Inside the goal band by more than the position noise.
    fn at_goal(&self) -> bool {
        self.cur.p_o.y < GOAL - 1e-3
    }

    fn full(&self) -> bool {
        self.frames.len() >= MAX_STEPS
    }

    /// Moves the tool linearly to the given pose without contact.
    fn travel(&mut self, to_h: Vec2, to_e: Vec2, steps: usize) {
        let (h0, e0) = (self.cur.p_h, self.cur.p_e);
        for i in 1..=steps {
            let t = i as f64 / steps as f64;
            self.cur.p_h = h0 + (to_h - h0) * t;
            self.cur.p_e = e0 + (to_e - e0) * t;
            self.emit();
        }
    }

    /// Tool and object move together by `dv` per step, in contact at
    /// `p_o + offset`. Stops early at the goal.
    fn push(&mut self, dv: Vec2, steps: usize, part: ToolPart, offset: Vec2) {
        for _ in 0..steps {
            if self.at_goal() || self.full() {
                return;
            }
            self.cur.p_h += dv;
            self.cur.p_e += dv;
            self.cur.p_o += dv;
            self.cur.contact = Some((part, self.cur.p_o + offset));
            self.emit();
        }
    }

    fn push_to_goal(&mut self, dv: Vec2, part: ToolPart, offset: Vec2) {
        self.push(dv, MAX_STEPS, part, offset);
    }

    /// Alternating contact bursts and pauses until the goal (or `floor`).
    fn bursts(&mut self, dv: Vec2, part: ToolPart, offset: Vec2, on: usize, off: usize, floor: f64) {
        while !self.at_goal() && !self.full() && self.cur.p_o.y > floor {
            self.push(dv, on, part, offset);
            if self.at_goal() {
                return;
            }
            self.idle(off);
        }
    }

    fn idle(&mut self, steps: usize) {
        for _ in 0..steps {
            if self.full() {
                return;
            }
            self.emit();
        }
    }

    /// The object slides by `dv` per step with the tool still.
    fn slide_to_goal(&mut self, dv: Vec2) {
        while !self.at_goal() && !self.full() {
            self.cur.p_o += dv;
            self.emit();
        }
    }

    fn finish(self, seed: u64) -> EpisodeLog {
        let cfg = RewardConfig::default();
        let frames = self.frames;
        let mut steps = Vec::with_capacity(frames.len());
        let mut grip = frames[0].p_h;
        for (i, f) in frames.iter().enumerate() {
            if f.holding {
                grip = f.p_h;
            }
            let half_gap = Vec2::new(0.0, 0.03);
            let g = TaskGeometry {
                p_g: grip,
                p_l: grip + half_gap,
                p_r: grip - half_gap,
                p_h: f.p_h,
                p_e: f.p_e,
                p_o: f.p_o,
                p_t: Vec2::new(f.p_o.x, 0.0),
            };
            let prev = if i == 0 { f } else { &frames[i - 1] };
            let tool_v = (f.p_h - prev.p_h) / DT;
            let r = compute_reward(&g, i as u32 + 1, &cfg);
            let axis = f.p_e - f.p_h;
            steps.push(StepRecord {
                tick: i as u32 + 1,
                action: [0.0, 0.0, 0.0, if f.holding { 1.0 } else { -1.0 }],
                geometry: g,
                opening: 0.06,
                holding: f.holding,
                tool_angle: atan2(axis.y, axis.x),
                tool_velocity: tool_v,
                tool_omega: 0.0,
                tool_energy: 0.5 * TOOL_MASS * tool_v.length_squared(),
                hook_direction: f.hook,
                object_velocity: (f.p_o - prev.p_o) / DT,
                contacts: f
                    .contact
                    .map(|(part, point)| ToolContact {
                        part,
                        point,
                        normal_impulse: 0.01,
                    })
                    .into_iter()
                    .collect(),
                branch: r.branch,
                predicates: r.predicates,
                reward: r.value,
            });
        }
        let success = steps.last().is_some_and(|s| s.predicates.req4());
        let first = &frames[0];
        let axis = first.p_e - first.p_h;
        let header = EpisodeHeader {
            schema: LOG_SCHEMA.into(),
            version: LOG_VERSION,
            episode: 0,
            seed,
            tool_kind: self.kind,
            spawn: Spawn {
                tool_kind: self.kind,
                tool_handle: first.p_h,
                tool_angle: atan2(axis.y, axis.x),
                object: first.p_o,
            },
            task: RewardTask::Full,
            dt: DT,
            midline_y: MIDLINE,
            success,
            length: steps.len() as u32,
            total_reward: steps.iter().map(|s| s.reward).sum(),
        };
        EpisodeLog { header, steps }
    }
}

/// Scenario families of the fixture suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    HookDrag,
    ActLikeI,
    Maneuver,
    /// Maneuver followed by a first handle contact with the hook facing away.
    ManeuverThenHandle,
    WideSweep,
    Hitting,
    Throwing,
    Correcting,
    CorrectingThenDrag,
    Other,
    Failure,
}

impl Scenario {
    pub fn expected(self) -> Vec<Tag> {
        match self {
            Scenario::HookDrag => vec![Tag::HookDrag],
            Scenario::ActLikeI => vec![Tag::ActLikeI],
            Scenario::Maneuver | Scenario::ManeuverThenHandle => vec![Tag::Maneuver],
            Scenario::WideSweep => vec![Tag::WideSweep],
            Scenario::Hitting => vec![Tag::Hitting],
            Scenario::Throwing => vec![Tag::Throwing],
            Scenario::Correcting => vec![Tag::Correcting],
            Scenario::CorrectingThenDrag => vec![Tag::HookDrag, Tag::Correcting],
            Scenario::Other => vec![Tag::Other],
            Scenario::Failure => vec![],
        }
    }
}

/// One labeled synthetic episode.
pub fn scenario(s: Scenario, kind: ToolKind, upper: bool, seed: u64) -> EpisodeLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = rng.random_range(0.4..0.9);
    let y0 = if upper { rng.random_range(0.55..0.85) } else { rng.random_range(0.22..0.45) };
    let p_o = Vec2::new(x0, y0);
    let speed = rng.random_range(0.0035..0.005);
    let approach = rng.random_range(30..60);
    let dx = rng.random_range(-0.1..0.1);
    let down = Vec2::new(0.0, -speed);
    let top = Vec2::new(0.0, RADIUS);
    let lift = Vec2::new(0.0, 0.15);
    // The part at the working end.
    let tip = if kind.has_crossbar() { ToolPart::Crossbar } else { ToolPart::Handle };
    let sub = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

    // Handle horizontal just above the object, tip a short way past it.
    let above_h = p_o + Vec2::new(-0.05, RADIUS + 0.01);
    let above_e = above_h + Vec2::new(0.1, 0.0);
    // Tool pointing straight down onto the object.
    let down_e = p_o + top;
    let down_h = down_e + Vec2::new(0.0, 0.15);
    let sideways = Some(Vec2::new(1.0, 0.0));
    let up_hook = Some(Vec2::new(0.0, 1.0));

    let mut sc = match s {
        Scenario::HookDrag => {
            let mut sc = Script::new(kind, p_o, down_h + Vec2::new(dx, 0.15), down_e + Vec2::new(dx, 0.15), sideways, sub);
            sc.travel(down_h, down_e, approach);
            sc.push_to_goal(down, tip, top);
            sc
        }
        Scenario::ActLikeI => {
            let off = rng.random_range(0.02..0.05);
            let h = p_o + Vec2::new(-off, RADIUS + 0.01);
            let e = h + Vec2::new(0.15, 0.0);
            let mut sc = Script::new(kind, p_o, h + lift * 2.0, e + lift * 2.0, up_hook, sub);
            sc.travel(h, e, approach);
            sc.push_to_goal(down, ToolPart::Handle, top);
            sc
        }
        Scenario::Maneuver | Scenario::ManeuverThenHandle => {
            let handle = s == Scenario::ManeuverThenHandle;
            let hook = if handle { up_hook } else { Some(Vec2::new(0.0, -1.0)) };
            let height = Vec2::new(0.0, 0.12);
            let right = p_o + height + Vec2::new(rng.random_range(0.06..0.12), 0.0);
            let left = p_o + height + Vec2::new(-0.12, 0.0);
            let reach = Vec2::new(0.15, 0.0);
            let mut sc = Script::new(kind, p_o, right, right + reach, hook, sub);
            sc.travel(left, left + reach, approach);
            let h = p_o + Vec2::new(-0.12, RADIUS + 0.01);
            sc.travel(h, h + reach, 15);
            let part = if handle { ToolPart::Handle } else { ToolPart::Crossbar };
            sc.bursts(down, part, top, 10, 3, 0.0);
            sc
        }
        Scenario::WideSweep => {
            let over = rng.random_range(0.12..0.25);
            let h = p_o + Vec2::new(-0.1, RADIUS + 0.012);
            let e = p_o + Vec2::new(over, RADIUS + 0.012);
            let mut sc = Script::new(kind, p_o, h + lift * 2.0, e + lift * 2.0, None, sub);
            sc.travel(h, e, approach);
            sc.push_to_goal(down, ToolPart::Handle, top);
            sc
        }
        Scenario::Hitting => {
            let mut sc = Script::new(kind, p_o, down_h + Vec2::new(dx, 0.2), down_e + Vec2::new(dx, 0.2), sideways, sub);
            sc.travel(down_h, down_e, approach);
            sc.push(Vec2::new(0.0, -0.004), rng.random_range(1..=4), tip, top);
            sc.slide_to_goal(Vec2::new(0.0, -rng.random_range(0.007..0.012)));
            sc
        }
        Scenario::Throwing => {
            let gap = Vec2::new(0.0, 0.1);
            let mut sc = Script::new(kind, p_o, down_h + gap + lift, down_e + gap + lift, sideways, sub);
            sc.travel(down_h + gap, down_e + gap, approach);
            sc.cur.holding = false;
            sc.travel(down_h, down_e, 10);
            sc.push(Vec2::new(0.0, -0.003), 8, tip, top);
            sc.slide_to_goal(Vec2::new(0.0, -0.003));
            sc
        }
        Scenario::Correcting | Scenario::CorrectingThenDrag => {
            let below_h = p_o + Vec2::new(-0.05, -(RADIUS + 0.01));
            let below_e = below_h + Vec2::new(0.1, 0.0);
            let mut sc = Script::new(kind, p_o, below_h - lift, below_e - lift, up_hook, sub);
            sc.travel(below_h, below_e, approach);
            let rise = rng.random_range(0.0055..0.007);
            sc.push(Vec2::new(0.0, rise), 10, ToolPart::Handle, -top);
            let o = sc.cur.p_o;
            if s == Scenario::Correcting {
                let h = o + Vec2::new(-0.05, RADIUS + 0.01);
                sc.travel(h, h + Vec2::new(0.1, 0.0), 15);
                sc.bursts(down, tip, top, 10, 3, 0.0);
            } else {
                sc.travel(o + top + Vec2::new(0.0, 0.15), o + top, 15);
                sc.push_to_goal(down, tip, top);
            }
            sc
        }
        Scenario::Other | Scenario::Failure => {
            let mut sc = Script::new(kind, p_o, above_h + lift * 2.0, above_e + lift * 2.0, up_hook, sub);
            sc.travel(above_h, above_e, approach);
            let floor = if s == Scenario::Failure { 0.15 } else { 0.0 };
            sc.bursts(down, tip, top, 10, 3, floor);
            if s == Scenario::Failure {
                sc.idle(MAX_STEPS);
            }
            sc
        }
    };
    sc.frames.truncate(MAX_STEPS);
    sc.finish(seed)
}

/// The 60-episode labeled suite: logs and their expected tags.
pub fn fixture_suite() -> Vec<(EpisodeLog, Vec<Tag>)> {
    use Scenario::*;
    use ToolKind::*;
    let plan: [(Scenario, &[ToolKind]); 11] = [
        (HookDrag, &[T, LRight, LLeft, T, LRight, LLeft, T, I]),
        (ActLikeI, &[LRight, LLeft, LRight, LLeft, LRight, LLeft]),
        (Maneuver, &[LRight, LLeft, LRight, LLeft, LRight, LLeft]),
        (ManeuverThenHandle, &[LRight, LLeft]),
        (WideSweep, &[I, I, I, I, I, I]),
        (Hitting, &[T, I, T, I, LRight, LLeft]),
        (Throwing, &[T, LRight, LLeft, I, T, I]),
        (Correcting, &[T, LRight, LLeft, I, T, I]),
        (CorrectingThenDrag, &[T, LRight, LLeft, I]),
        (Other, &[T, LRight, LLeft, I, T, I]),
        (Failure, &[T, LRight, LLeft, I]),
    ];
    let mut out = Vec::new();
    for (s, kinds) in plan {
        for &kind in kinds {
            let n = out.len() as u64;
            let mut log = scenario(s, kind, n % 2 == 0, 1000 + n);
            log.header.episode = n;
            out.push((log, s.expected()));
        }
    }
    out
}
