//! Deterministic fixed-timestep planar rigid-body engine for the tool arena.
//!
//! The arena is viewed top-down. Gravity acts out of plane and only loads
//! floor friction, which opposes the in-plane sliding of the tool and the
//! object; the arm is carried above the floor. Bodies are simulated in
//! maximal coordinates: arm links are tied together by revolute joints and a
//! grasped tool is tied to the gripper by a friction-limited weld. Joints,
//! the weld and contacts share one sequential-impulse velocity solver with an
//! iterative positional pass after integration.

mod arm;
mod collide;
mod shape;
mod solver;
mod tool;
mod world;

pub use arm::{ArmLayout, LinkLayout};
pub use collide::{collide, Manifold, ManifoldPoint};
pub use shape::{composite_mass, Polygon, Shape};
pub use tool::{ToolKind, ToolLayout, ToolPart, ToolShape};
pub use world::{
    kinetic_energy, BodyId, ContactPoint, GripWeld, GripperState, RigidBody, TaskGeometry, World,
    WorldState, BODY_COUNT, GRIPPER, LINK1, LINK2, OBJECT, TOOL,
};

use serde::{Deserialize, Serialize};

use crate::math::Vec2;

/// Failures raised by the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhysicsError {
    #[error("simulation diverged: non-finite state on body {body:?} at tick {tick}")]
    Diverged { body: BodyId, tick: u64 },
    #[error("invalid world input: {0}")]
    InvalidInput(&'static str),
}

/// Direction of gravity relative to the arena plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GravityMode {
    /// Top-down table: gravity loads Coulomb floor friction on tool and object.
    #[default]
    OutOfPlane,
    /// Vertical plane along -y, no floor. Used to validate the integrator.
    InPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaConfig {
    /// Lower-left interior corner.
    pub origin: Vec2,
    pub width: f64,
    pub height: f64,
    pub wall_thickness: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            origin: Vec2::ZERO,
            width: 1.2,
            height: 1.0,
            wall_thickness: 0.05,
        }
    }
}

impl ArenaConfig {
    pub fn min(&self) -> Vec2 {
        self.origin
    }

    pub fn max(&self) -> Vec2 {
        self.origin + Vec2::new(self.width, self.height)
    }

    /// Nearest point of the arena bottom to `p`.
    pub fn bottom_point(&self, p: Vec2) -> Vec2 {
        let x = p.x.clamp(self.origin.x, self.origin.x + self.width);
        Vec2::new(x, self.origin.y)
    }

    /// The four static wall boxes: bottom, right, top, left.
    pub fn walls(&self) -> [Polygon; 4] {
        let (lo, hi, t) = (self.min(), self.max(), self.wall_thickness);
        [
            Polygon::aabb(Vec2::new(lo.x - t, lo.y - t), Vec2::new(hi.x + t, lo.y)),
            Polygon::aabb(Vec2::new(hi.x, lo.y - t), Vec2::new(hi.x + t, hi.y + t)),
            Polygon::aabb(Vec2::new(lo.x - t, hi.y), Vec2::new(hi.x + t, hi.y + t)),
            Polygon::aabb(Vec2::new(lo.x - t, lo.y - t), Vec2::new(lo.x, hi.y + t)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    /// Shoulder anchor, world coordinates.
    pub base: Vec2,
    pub link_lengths: [f64; 3],
    pub link_half_width: f64,
    /// Areal density of the links, kg/m².
    pub density: f64,
    /// Joint angles at reset (each relative to the parent link).
    pub rest_angles: [f64; 3],
    pub joint_limits: [[f64; 2]; 3],
    pub torque_limits: [f64; 3],
    /// Viscous joint damping, N·m·s/rad.
    pub joint_damping: [f64; 3],
    /// Joints held rigid at their rest angle (test rigs).
    pub locked: [bool; 3],
    pub palm_half_depth: f64,
    pub palm_half_span: f64,
    pub claw_length: f64,
    pub claw_half_thickness: f64,
    /// Distance between claw tip centres when fully closed.
    pub opening_min: f64,
    /// Distance between claw tip centres when fully open.
    pub opening_max: f64,
    /// Claw travel rate limit, m/s.
    pub claw_speed: f64,
    /// Squeeze force of each claw, N.
    pub grip_force: f64,
    /// Claw/handle friction used for the holding limit.
    pub grip_friction: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        use core::f64::consts::FRAC_PI_2;
        Self {
            base: Vec2::new(0.05, 0.5),
            link_lengths: [0.25, 0.20, 0.15],
            link_half_width: 0.015,
            density: 10.0,
            rest_angles: [0.9, -1.6, -0.9],
            joint_limits: [[-FRAC_PI_2, FRAC_PI_2], [-2.6, 2.6], [-2.6, 2.6]],
            torque_limits: [2.0, 2.0, 2.0],
            joint_damping: [0.3, 0.3, 0.3],
            locked: [false; 3],
            palm_half_depth: 0.005,
            palm_half_span: 0.055,
            claw_length: 0.06,
            claw_half_thickness: 0.005,
            opening_min: 0.01,
            opening_max: 0.10,
            claw_speed: 0.5,
            grip_force: 10.0,
            grip_friction: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub handle_length: f64,
    pub handle_half_width: f64,
    pub crossbar_length: f64,
    pub crossbar_half_width: f64,
    pub mass: f64,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            handle_length: 0.30,
            handle_half_width: 0.01,
            crossbar_length: 0.16,
            crossbar_half_width: 0.01,
            mass: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectConfig {
    pub radius: f64,
    pub mass: f64,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            radius: 0.03,
            mass: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub substeps: u32,
    pub velocity_iterations: u32,
    pub position_iterations: u32,
    /// Fraction of remaining penetration removed per positional iteration.
    pub baumgarte: f64,
    /// Penetration the positional pass leaves in place.
    pub linear_slop: f64,
    /// Largest positional correction per iteration.
    pub max_correction: f64,
    /// Contacts are generated for gaps up to this distance.
    pub contact_margin: f64,
    /// Post-step penetration bound checked by [`WorldState::max_penetration`].
    pub penetration_slop: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            substeps: 4,
            velocity_iterations: 8,
            position_iterations: 4,
            baumgarte: 0.2,
            linear_slop: 2e-4,
            max_correction: 0.02,
            contact_margin: 2e-3,
            penetration_slop: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub arena: ArenaConfig,
    pub arm: ArmConfig,
    pub tool: ToolConfig,
    pub object: ObjectConfig,
    pub solver: SolverConfig,
    pub friction: f64,
    pub restitution: f64,
    pub gravity: f64,
    pub gravity_mode: GravityMode,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            arena: ArenaConfig::default(),
            arm: ArmConfig::default(),
            tool: ToolConfig::default(),
            object: ObjectConfig::default(),
            solver: SolverConfig::default(),
            friction: 0.4,
            restitution: 0.0,
            gravity: 9.81,
            gravity_mode: GravityMode::OutOfPlane,
        }
    }
}

impl WorldConfig {
    /// Checks the static invariants of the configuration.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let a = &self.arm;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.arena.width) && pos(self.arena.height) && pos(self.arena.wall_thickness)) {
            return Err(PhysicsError::InvalidInput(
                "arena dimensions must be positive",
            ));
        }
        if !a.link_lengths.iter().all(|l| pos(*l)) || !pos(a.link_half_width) || !pos(a.density) {
            return Err(PhysicsError::InvalidInput(
                "link dimensions must be positive",
            ));
        }
        if !(pos(a.claw_length) && pos(a.claw_half_thickness) && pos(a.claw_speed)) {
            return Err(PhysicsError::InvalidInput(
                "claw dimensions must be positive",
            ));
        }
        if !(a.opening_min > 0.0 && a.opening_min < a.opening_max) {
            return Err(PhysicsError::InvalidInput(
                "need 0 < opening_min < opening_max",
            ));
        }
        if a.opening_max / 2.0 + a.claw_half_thickness > a.palm_half_span + 1e-12 {
            return Err(PhysicsError::InvalidInput(
                "open claws must fit on the palm",
            ));
        }
        for (i, lim) in a.joint_limits.iter().enumerate() {
            if !(lim[0] < lim[1]) || !(lim[0]..=lim[1]).contains(&a.rest_angles[i]) {
                return Err(PhysicsError::InvalidInput(
                    "rest angle outside joint limits",
                ));
            }
        }
        let t = &self.tool;
        if !(pos(t.handle_length)
            && pos(t.handle_half_width)
            && pos(t.crossbar_length)
            && pos(t.crossbar_half_width)
            && pos(t.mass))
        {
            return Err(PhysicsError::InvalidInput(
                "tool dimensions must be positive",
            ));
        }
        if !(pos(self.object.radius) && pos(self.object.mass)) {
            return Err(PhysicsError::InvalidInput(
                "object dimensions must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.restitution) || !(self.friction >= 0.0) {
            return Err(PhysicsError::InvalidInput(
                "restitution in [0,1], friction >= 0",
            ));
        }
        let s = &self.solver;
        if s.substeps == 0 || s.velocity_iterations == 0 {
            return Err(PhysicsError::InvalidInput(
                "solver iteration counts must be >= 1",
            ));
        }
        Ok(())
    }
}
