//! Episode layer over the physics engine: spawning, observations, action
//! application, reward wiring and termination.

pub mod render;

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::{cos, sin, Vec2};
use crate::physics::{collide, PhysicsError, Shape, TaskGeometry, ToolKind, World, WorldState};
use crate::reward::{compute_reward, RewardBreakdown, RewardConfig};
pub use render::{render_frame, Image, Palette, FRAME_LEN, IMAGE_HEIGHT, IMAGE_WIDTH};

pub const STACK: usize = 4;
pub const PROPRIO_LEN: usize = 8;
pub const LOW_DIM_LEN: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ToolPolicy {
    #[default]
    Uniform,
    Fixed(ToolKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationMode {
    #[default]
    Pixels,
    LowDim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    pub dt: f64,
    pub tool_policy: ToolPolicy,
    /// Handle-midpoint distance band from the arm base.
    pub tool_spawn_radius: [f64; 2],
    /// Object distance band from the tool end-effector.
    pub object_tip_distance: [f64; 2],
    /// How far past the arm's reach the object may spawn.
    pub object_reach_slack: f64,
    pub spawn_attempts: u32,
    pub observation: ObservationMode,
    pub palette: Palette,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            dt: 0.01,
            tool_policy: ToolPolicy::Uniform,
            tool_spawn_radius: [0.3, 0.55],
            object_tip_distance: [0.15, 0.45],
            object_reach_slack: 0.25,
            spawn_attempts: 1000,
            observation: ObservationMode::Pixels,
            palette: Palette::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("no valid spawn found in {0} attempts")]
    SpawnExhausted(u32),
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("invalid episode config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let band = |b: [f64; 2]| b[0].is_finite() && b[0] >= 0.0 && b[0] < b[1];
        if self.max_steps == 0 || !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(EnvError::Config("max_steps and dt must be positive"));
        }
        if !band(self.tool_spawn_radius) || !band(self.object_tip_distance) {
            return Err(EnvError::Config("spawn bands need 0 <= lo < hi"));
        }
        if !(self.object_reach_slack > 0.0) || self.spawn_attempts == 0 {
            return Err(EnvError::Config(
                "object_reach_slack and spawn_attempts must be positive",
            ));
        }
        Ok(())
    }
}

/// Where things were placed at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spawn {
    pub tool_kind: ToolKind,
    pub tool_handle: Vec2,
    pub tool_angle: f64,
    pub object: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `STACK` frames oldest first, each `FRAME_LEN` bytes; empty in low-dim
    /// mode.
    pub frames: Vec<u8>,
    /// Pixel mode: `STACK` proprio vectors oldest first. Low-dim mode: the
    /// feature vector.
    pub vector: Vec<f64>,
}

impl Observation {
    pub fn frame(&self, i: usize) -> &[u8] {
        &self.frames[i * FRAME_LEN..(i + 1) * FRAME_LEN]
    }

    /// Frames as network input channels, scaled to [0, 1].
    pub fn pixels(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|b| *b as f64 / 255.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoneReason {
    Success,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub reason: Option<DoneReason>,
    pub info: TaskGeometry,
}

/// Joint angles, opening, joint rates, opening rate.
pub fn proprio(world: &World, s: &WorldState) -> [f64; PROPRIO_LEN] {
    let q = world.joint_angles(s);
    let w = world.joint_velocities(s);
    [
        q[0],
        q[1],
        q[2],
        s.gripper.opening,
        w[0],
        w[1],
        w[2],
        s.gripper.opening_rate,
    ]
}

/// Proprio, then pG, pH, pE, pO, pT relative to the arm base, then the tool
/// kind one-hot in `ToolKind::ALL` order.
pub fn low_dim_observation(world: &World, s: &WorldState) -> [f64; LOW_DIM_LEN] {
    let mut out = [0.0; LOW_DIM_LEN];
    out[..PROPRIO_LEN].copy_from_slice(&proprio(world, s));
    let g = world.task_geometry(s);
    let base = world.config().arm.base;
    for (i, p) in [g.p_g, g.p_h, g.p_e, g.p_o, g.p_t].iter().enumerate() {
        let r = *p - base;
        out[PROPRIO_LEN + 2 * i] = r.x;
        out[PROPRIO_LEN + 2 * i + 1] = r.y;
    }
    out[18 + s.tool.kind.index()] = 1.0;
    out
}

/// Samples a tool and object placement. The tool lies inside the arena,
/// clear of the open claws and not already between them; the object is out
/// of the arm's reach but within the configured band of the tool tip, clear
/// of the tool and the target.
pub fn sample_spawn(
    world: &World,
    cfg: &EpisodeConfig,
    reward: &RewardConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Spawn, EnvError> {
    let wc = world.config();
    let (lo, hi) = (wc.arena.min(), wc.arena.max());
    let base = wc.arm.base;
    let reach = world.reach();
    let radius = wc.object.radius;
    let inside =
        |p: Vec2, m: f64| p.x > lo.x + m && p.x < hi.x - m && p.y > lo.y + m && p.y < hi.y - m;
    for _ in 0..cfg.spawn_attempts {
        let kind = match cfg.tool_policy {
            ToolPolicy::Uniform => ToolKind::ALL[rng.random_range(0..4)],
            ToolPolicy::Fixed(k) => k,
        };
        let r = rng.random_range(cfg.tool_spawn_radius[0]..cfg.tool_spawn_radius[1]);
        let phi = rng.random_range(-0.5 * PI..0.5 * PI);
        let handle = base + Vec2::new(r * cos(phi), r * sin(phi));
        let angle = rng.random_range(-PI..PI);
        let d = rng.random_range(cfg.object_tip_distance[0]..cfg.object_tip_distance[1]);
        let psi = rng.random_range(-PI..PI);

        let probe = world.initial_state(kind, handle, angle, Vec2::ZERO);
        let tool = world.tool_polygons(&probe);
        if !tool
            .iter()
            .all(|p| p.vertices().iter().all(|v| inside(*v, 0.01)))
        {
            continue;
        }
        let claws = world.arm_polygons(&probe);
        let touches = |a: &Shape, sep: f64| {
            tool.iter()
                .any(|p| !collide(a, &Shape::Polygon(*p), sep).is_empty())
        };
        if claws[4..]
            .iter()
            .any(|c| touches(&Shape::Polygon(*c), 0.01))
        {
            continue;
        }
        let g = world.task_geometry(&probe);
        if g.p_g.distance(g.p_h) < reward.claw_length {
            continue;
        }
        let tip = g.p_e;
        let object = tip + Vec2::new(d * cos(psi), d * sin(psi));
        let from_base = object.distance(base);
        if !inside(object, radius + 0.01)
            || from_base <= reach + radius
            || from_base > reach + cfg.object_reach_slack
            || object.distance(wc.arena.bottom_point(object)) < reward.boundary_thickness
        {
            continue;
        }
        let disc = Shape::Circle {
            center: object,
            radius,
        };
        if touches(&disc, 0.01) {
            continue;
        }
        return Ok(Spawn {
            tool_kind: kind,
            tool_handle: handle,
            tool_angle: angle,
            object,
        });
    }
    Err(EnvError::SpawnExhausted(cfg.spawn_attempts))
}

/// One episode of the tool task.
#[derive(Debug, Clone)]
pub struct Env {
    world: World,
    cfg: EpisodeConfig,
    reward: RewardConfig,
    spawn: Spawn,
    state: WorldState,
    step: u32,
    done: bool,
    frames: Vec<u8>,
    vector: Vec<f64>,
}

impl Env {
    pub fn reset(
        world: World,
        cfg: EpisodeConfig,
        reward: RewardConfig,
        seed: u64,
    ) -> Result<(Env, Observation), EnvError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spawn = sample_spawn(&world, &cfg, &reward, &mut rng)?;
        Ok(Self::from_spawn(world, cfg, reward, spawn))
    }

    /// Starts an episode from a known placement (used by replay).
    pub fn from_spawn(
        world: World,
        cfg: EpisodeConfig,
        reward: RewardConfig,
        spawn: Spawn,
    ) -> (Env, Observation) {
        let state = world.initial_state(
            spawn.tool_kind,
            spawn.tool_handle,
            spawn.tool_angle,
            spawn.object,
        );
        let mut env = Env {
            world,
            cfg,
            reward,
            spawn,
            state,
            step: 0,
            done: false,
            frames: Vec::new(),
            vector: Vec::new(),
        };
        let obs = env.begin(spawn);
        (env, obs)
    }

    /// Reuses this environment for a new episode drawn from `seed`.
    pub fn restart(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spawn = sample_spawn(&self.world, &self.cfg, &self.reward, &mut rng)?;
        Ok(self.begin(spawn))
    }

    fn begin(&mut self, spawn: Spawn) -> Observation {
        self.spawn = spawn;
        self.state = self.world.initial_state(
            spawn.tool_kind,
            spawn.tool_handle,
            spawn.tool_angle,
            spawn.object,
        );
        self.step = 0;
        self.done = false;
        self.frames.clear();
        self.vector.clear();
        match self.cfg.observation {
            ObservationMode::Pixels => {
                let f = render_frame(&self.world, &self.state, &self.cfg.palette);
                let p = proprio(&self.world, &self.state);
                for _ in 0..STACK {
                    self.frames.extend_from_slice(&f.data);
                    self.vector.extend_from_slice(&p);
                }
            }
            ObservationMode::LowDim => {
                self.vector = low_dim_observation(&self.world, &self.state).to_vec();
            }
        }
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        Observation {
            frames: self.frames.clone(),
            vector: self.vector.clone(),
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// Overwrites the physical state; scripted tests drive the scene this way.
    pub fn set_state(&mut self, s: WorldState) {
        self.state = s;
    }

    pub fn spawn(&self) -> &Spawn {
        &self.spawn
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn geometry(&self) -> TaskGeometry {
        self.world.task_geometry(&self.state)
    }

    /// Applies a raw policy action for one control step. The first three
    /// entries are torques (clamped by the engine); the gripper closes when
    /// the fourth is positive.
    pub fn step(&mut self, raw: [f64; 4]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let grip = if raw[3] > 0.0 { 1.0 } else { -1.0 };
        self.state =
            self.world
                .step_world(&self.state, [raw[0], raw[1], raw[2], grip], self.cfg.dt)?;
        self.step += 1;
        let info = self.world.task_geometry(&self.state);
        let reward = compute_reward(&info, self.step, &self.reward);
        let reason = if reward.is_terminal() {
            Some(DoneReason::Success)
        } else if self.step >= self.cfg.max_steps {
            Some(DoneReason::Timeout)
        } else {
            None
        };
        self.done = reason.is_some();
        match self.cfg.observation {
            ObservationMode::Pixels => {
                let f = render_frame(&self.world, &self.state, &self.cfg.palette);
                self.frames.drain(..FRAME_LEN);
                self.frames.extend_from_slice(&f.data);
                self.vector.drain(..PROPRIO_LEN);
                self.vector
                    .extend_from_slice(&proprio(&self.world, &self.state));
            }
            ObservationMode::LowDim => {
                self.vector
                    .copy_from_slice(&low_dim_observation(&self.world, &self.state));
            }
        }
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            reason,
            info,
        })
    }
}
