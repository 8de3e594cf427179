//! World state, the fixed-step integrator and task key points.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::arm::ArmLayout;
use super::collide::collide;
use super::shape::{Polygon, Shape};
use super::solver::{
    apply_angular_impulse, apply_impulse, mat_mul, point_mass_inverse, row_mass, AngleBound,
    AngleRow, Bodies, ContactRow, InvMass, PointRow, WeldRow,
};
use super::tool::{ToolKind, ToolLayout, ToolShape};
use super::{GravityMode, PhysicsError, WorldConfig};
use crate::math::{abs, sqrt, wrap_angle, Rot, Transform, Vec2};

pub const LINK1: usize = 0;
pub const LINK2: usize = 1;
pub const GRIPPER: usize = 2;
pub const TOOL: usize = 3;
pub const OBJECT: usize = 4;
pub const BODY_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyId {
    Link1,
    Link2,
    Gripper,
    Tool,
    Object,
    Wall,
}

impl BodyId {
    pub const DYNAMIC: [BodyId; BODY_COUNT] = [
        BodyId::Link1,
        BodyId::Link2,
        BodyId::Gripper,
        BodyId::Tool,
        BodyId::Object,
    ];

    pub fn index(self) -> Option<usize> {
        match self {
            BodyId::Link1 => Some(LINK1),
            BodyId::Link2 => Some(LINK2),
            BodyId::Gripper => Some(GRIPPER),
            BodyId::Tool => Some(TOOL),
            BodyId::Object => Some(OBJECT),
            BodyId::Wall => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyId::Link1 => "link1",
            BodyId::Link2 => "link2",
            BodyId::Gripper => "gripper",
            BodyId::Tool => "tool",
            BodyId::Object => "object",
            BodyId::Wall => "wall",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBody {
    /// Centre of mass.
    pub position: Vec2,
    pub angle: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    pub mass: f64,
    pub inertia: f64,
}

impl RigidBody {
    pub fn at_rest(position: Vec2, angle: f64, mass: f64, inertia: f64) -> Self {
        Self {
            position,
            angle,
            linear_velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            mass,
            inertia,
        }
    }

    pub fn transform(&self) -> Transform {
        Transform::new(self.position, self.angle)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.linear_velocity.length_squared()
            + 0.5 * self.inertia * self.angular_velocity * self.angular_velocity
    }

    pub fn velocity_at(&self, p: Vec2) -> Vec2 {
        self.linear_velocity + Vec2::cross_scalar(self.angular_velocity, p - self.position)
    }

    fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.angle.is_finite()
            && self.linear_velocity.is_finite()
            && self.angular_velocity.is_finite()
    }
}

/// Friction-limited weld holding the tool in the gripper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripWeld {
    pub anchor_gripper: Vec2,
    pub anchor_tool: Vec2,
    /// Tool angle minus gripper angle.
    pub reference_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    /// Distance between the claw tip centres.
    pub opening: f64,
    /// Rate of change of `opening` over the last substep, m/s.
    pub opening_rate: f64,
    pub close_command: bool,
    pub weld: Option<GripWeld>,
    /// Closing on a handle inside the grasp gate; claw/tool contacts are off.
    pub seating: bool,
}

impl GripperState {
    pub fn is_holding(&self) -> bool {
        self.weld.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub bodies: (BodyId, BodyId),
    /// Collider index within each body (tool: 0 handle, 1 crossbar; gripper:
    /// 0 palm, 1 left claw, 2 right claw).
    pub parts: (u8, u8),
    pub point: Vec2,
    /// Unit normal from the first body toward the second.
    pub normal: Vec2,
    pub penetration: f64,
    pub friction: f64,
    pub normal_impulse: f64,
    pub friction_impulse: f64,
    pub substep: u32,
}

impl ContactPoint {
    pub fn within_friction_cone(&self) -> bool {
        abs(self.friction_impulse) <= self.friction * abs(self.normal_impulse)
    }

    pub fn involves(&self, a: BodyId, b: BodyId) -> bool {
        self.bodies == (a, b) || self.bodies == (b, a)
    }
}

/// The seven task key points, arena coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskGeometry {
    /// Pinch position: midpoint of the claw tips.
    pub p_g: Vec2,
    pub p_l: Vec2,
    pub p_r: Vec2,
    /// Tool handle midpoint.
    pub p_h: Vec2,
    /// Tool end-effector.
    pub p_e: Vec2,
    pub p_o: Vec2,
    /// Nearest point of the arena bottom to the object.
    pub p_t: Vec2,
}

impl TaskGeometry {
    pub fn points(&self) -> [Vec2; 7] {
        [
            self.p_g, self.p_l, self.p_r, self.p_h, self.p_e, self.p_o, self.p_t,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.points().iter().all(|p| p.is_finite())
    }

    pub fn max_abs_diff(&self, other: &TaskGeometry) -> f64 {
        self.points()
            .iter()
            .zip(other.points())
            .map(|(a, b)| abs(a.x - b.x).max(abs(a.y - b.y)))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub bodies: [RigidBody; BODY_COUNT],
    pub tool: ToolShape,
    pub gripper: GripperState,
    pub tick: u64,
    /// Contacts solved during the last step, across all substeps.
    pub contacts: Vec<ContactPoint>,
}

pub fn kinetic_energy(state: &WorldState) -> f64 {
    state.bodies.iter().map(RigidBody::kinetic_energy).sum()
}

impl WorldState {
    pub fn body(&self, id: BodyId) -> Option<&RigidBody> {
        id.index().map(|i| &self.bodies[i])
    }

    /// Text record, one body per line: `id x y angle vx vy omega`.
    pub fn snapshot_text(&self) -> String {
        let mut s = String::new();
        let g = &self.gripper;
        let _ = writeln!(
            s,
            "# toolrl-scene v1 tick={} tool={} opening={} holding={}",
            self.tick,
            self.tool.kind.name(),
            g.opening,
            g.is_holding() as u8
        );
        for (id, b) in BodyId::DYNAMIC.iter().zip(&self.bodies) {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {}",
                id.name(),
                b.position.x,
                b.position.y,
                b.angle,
                b.linear_velocity.x,
                b.linear_velocity.y,
                b.angular_velocity
            );
        }
        s
    }

    /// Largest (body, field) error over two states; used by determinism audits.
    pub fn max_abs_diff(&self, other: &WorldState) -> f64 {
        let mut d = abs(self.gripper.opening - other.gripper.opening);
        for (a, b) in self.bodies.iter().zip(&other.bodies) {
            for (x, y) in [
                (a.position.x, b.position.x),
                (a.position.y, b.position.y),
                (a.angle, b.angle),
                (a.linear_velocity.x, b.linear_velocity.x),
                (a.linear_velocity.y, b.linear_velocity.y),
                (a.angular_velocity, b.angular_velocity),
            ] {
                d = d.max(abs(x - y));
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy)]
struct Collider {
    body: BodyId,
    index: Option<usize>,
    part: u8,
    shape: Shape,
}

fn pair_collides(a: BodyId, b: BodyId, suppress_grip: bool) -> bool {
    use BodyId::*;
    match (a, b) {
        (Gripper, Tool) | (Tool, Gripper) => !suppress_grip,
        (Gripper, Object) | (Object, Gripper) => true,
        (Tool, Object) | (Object, Tool) => true,
        (Tool, Wall) | (Wall, Tool) | (Object, Wall) | (Wall, Object) => true,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy)]
struct JointDef {
    parent: Option<usize>,
    child: usize,
    /// Parent-frame anchor, or the world anchor when `parent` is `None`.
    anchor_parent: Vec2,
    anchor_child: Vec2,
    limits: [f64; 2],
    locked_at: Option<f64>,
    damping: f64,
}

/// Immutable engine for one world configuration.
#[derive(Debug, Clone)]
pub struct World {
    cfg: WorldConfig,
    arm: ArmLayout,
    tools: [ToolLayout; 4],
    joints: [JointDef; 3],
    walls: [Polygon; 4],
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<Self, PhysicsError> {
        cfg.validate()?;
        let arm = ArmLayout::new(&cfg.arm);
        let tools = ToolKind::ALL.map(|k| ToolShape::new(k, &cfg.tool).layout(cfg.tool.mass));
        let joints = core::array::from_fn(|j| JointDef {
            parent: (j > 0).then(|| j - 1),
            child: j,
            anchor_parent: if j == 0 {
                cfg.arm.base
            } else {
                arm.links[j - 1].distal
            },
            anchor_child: arm.links[j].proximal,
            limits: cfg.arm.joint_limits[j],
            locked_at: cfg.arm.locked[j].then_some(cfg.arm.rest_angles[j]),
            damping: cfg.arm.joint_damping[j],
        });
        let walls = cfg.arena.walls();
        Ok(Self {
            cfg,
            arm,
            tools,
            joints,
            walls,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn arm_layout(&self) -> &ArmLayout {
        &self.arm
    }

    pub fn tool_layout(&self, kind: ToolKind) -> &ToolLayout {
        &self.tools[kind.index()]
    }

    pub fn walls(&self) -> &[Polygon; 4] {
        &self.walls
    }

    /// Pinch-point reach of the arm from its base.
    pub fn reach(&self) -> f64 {
        self.arm.reach()
    }

    /// Tool body pose that puts the handle midpoint at `handle_mid`.
    pub fn tool_pose_for_handle(&self, kind: ToolKind, handle_mid: Vec2, angle: f64) -> Vec2 {
        handle_mid - Rot::new(angle).apply(self.tool_layout(kind).handle_mid)
    }

    /// Arm at its rest pose, claws open, everything at rest.
    pub fn initial_state(
        &self,
        kind: ToolKind,
        tool_handle_mid: Vec2,
        tool_angle: f64,
        object_position: Vec2,
    ) -> WorldState {
        let poses = self
            .arm
            .forward_kinematics(self.cfg.arm.base, self.cfg.arm.rest_angles);
        let links = core::array::from_fn::<_, 3, _>(|i| {
            let l = &self.arm.links[i];
            RigidBody::at_rest(poses[i].0, poses[i].1, l.mass, l.inertia)
        });
        let tl = self.tool_layout(kind);
        let tool = RigidBody::at_rest(
            self.tool_pose_for_handle(kind, tool_handle_mid, tool_angle),
            tool_angle,
            tl.mass,
            tl.inertia,
        );
        let r = self.cfg.object.radius;
        let m = self.cfg.object.mass;
        let object = RigidBody::at_rest(object_position, 0.0, m, 0.5 * m * r * r);
        WorldState {
            bodies: [links[0], links[1], links[2], tool, object],
            tool: ToolShape::new(kind, &self.cfg.tool),
            gripper: GripperState {
                opening: self.cfg.arm.opening_max,
                opening_rate: 0.0,
                close_command: false,
                weld: None,
                seating: false,
            },
            tick: 0,
            contacts: Vec::new(),
        }
    }

    pub fn joint_angles(&self, state: &WorldState) -> [f64; 3] {
        core::array::from_fn(|j| {
            let parent = self.joints[j].parent.map_or(0.0, |p| state.bodies[p].angle);
            wrap_angle(state.bodies[j].angle - parent)
        })
    }

    pub fn joint_velocities(&self, state: &WorldState) -> [f64; 3] {
        core::array::from_fn(|j| {
            let parent = self.joints[j]
                .parent
                .map_or(0.0, |p| state.bodies[p].angular_velocity);
            state.bodies[j].angular_velocity - parent
        })
    }

    pub fn task_geometry(&self, state: &WorldState) -> TaskGeometry {
        let gt = state.bodies[GRIPPER].transform();
        let (l, r) = self.arm.claw_tips_local(state.gripper.opening);
        let tt = state.bodies[TOOL].transform();
        let tl = self.tool_layout(state.tool.kind);
        let p_o = state.bodies[OBJECT].position;
        TaskGeometry {
            p_g: gt.apply(self.arm.pinch_local()),
            p_l: gt.apply(l),
            p_r: gt.apply(r),
            p_h: tt.apply(tl.handle_mid),
            p_e: tt.apply(tl.tip),
            p_o,
            p_t: self.cfg.arena.bottom_point(p_o),
        }
    }

    /// World-frame hook direction and hook root of an L tool.
    pub fn hook_frame(&self, state: &WorldState) -> Option<(Vec2, Vec2)> {
        let tl = self.tool_layout(state.tool.kind);
        let t = state.bodies[TOOL].transform();
        tl.hook_direction
            .map(|d| (t.q.apply(d), t.apply(tl.hook_root)))
    }

    /// Link bars, palm and both claws in world coordinates.
    pub fn arm_polygons(&self, state: &WorldState) -> [Polygon; 6] {
        let t: [Transform; 3] = core::array::from_fn(|i| state.bodies[i].transform());
        let [cl, cr] = self.arm.claws_local(state.gripper.opening);
        [
            self.arm.links[0].bar.transformed(&t[0]),
            self.arm.links[1].bar.transformed(&t[1]),
            self.arm.links[2].bar.transformed(&t[2]),
            self.arm.palm.transformed(&t[2]),
            cl.transformed(&t[2]),
            cr.transformed(&t[2]),
        ]
    }

    pub fn tool_polygons(&self, state: &WorldState) -> Vec<Polygon> {
        let t = state.bodies[TOOL].transform();
        self.tool_layout(state.tool.kind)
            .pieces
            .iter()
            .map(|p| p.transformed(&t))
            .collect()
    }

    fn colliders(&self, bodies: &Bodies, kind: ToolKind, opening: f64) -> Vec<Collider> {
        let mut out = Vec::with_capacity(10);
        let gt = bodies[GRIPPER].transform();
        let [cl, cr] = self.arm.claws_local(opening);
        // Only the claws reach down to floor level; the palm rides above the
        // tool like the links do.
        for (part, p) in [(1u8, cl), (2, cr)] {
            out.push(Collider {
                body: BodyId::Gripper,
                index: Some(GRIPPER),
                part,
                shape: Shape::Polygon(p.transformed(&gt)),
            });
        }
        let tt = bodies[TOOL].transform();
        for (part, p) in self.tool_layout(kind).pieces.iter().enumerate() {
            out.push(Collider {
                body: BodyId::Tool,
                index: Some(TOOL),
                part: part as u8,
                shape: Shape::Polygon(p.transformed(&tt)),
            });
        }
        out.push(Collider {
            body: BodyId::Object,
            index: Some(OBJECT),
            part: 0,
            shape: Shape::Circle {
                center: bodies[OBJECT].position,
                radius: self.cfg.object.radius,
            },
        });
        for (part, w) in self.walls.iter().enumerate() {
            out.push(Collider {
                body: BodyId::Wall,
                index: None,
                part: part as u8,
                shape: Shape::Polygon(*w),
            });
        }
        out
    }

    /// Deepest overlap between any colliding pair in `state`.
    pub fn max_penetration(&self, state: &WorldState) -> f64 {
        let suppress = state.gripper.weld.is_some() || state.gripper.seating;
        let cols = self.colliders(&state.bodies, state.tool.kind, state.gripper.opening);
        let mut worst: f64 = 0.0;
        for (i, a) in cols.iter().enumerate() {
            for b in &cols[i + 1..] {
                if !pair_collides(a.body, b.body, suppress) {
                    continue;
                }
                for mp in collide(&a.shape, &b.shape, 0.0).iter() {
                    worst = worst.max(-mp.separation);
                }
            }
        }
        worst
    }

    /// True when the handle midpoint is within half a claw length of the pinch
    /// point, the same gate as the reach-tool predicate.
    pub fn grasp_gate(&self, state: &WorldState) -> bool {
        let g = self.task_geometry(state);
        g.p_g.distance(g.p_h) < 0.5 * self.arm.claw_length()
    }

    /// Advances the gripper by one substep of length `h`: rate-limited claw
    /// travel, weld creation when the claws seat on a gated handle, and weld
    /// release on an open command.
    pub fn grip_constraint(&self, state: &WorldState, close: bool, h: f64) -> WorldState {
        let mut next = state.clone();
        self.update_gripper(&mut next, close, h);
        next
    }

    fn update_gripper(&self, s: &mut WorldState, close: bool, h: f64) {
        let a = &self.cfg.arm;
        let old = s.gripper.opening;
        let travel = a.claw_speed * h;
        s.gripper.close_command = close;
        s.gripper.seating = false;
        let new = if close {
            if s.gripper.weld.is_some() {
                // Escaped the claws entirely: the hold is lost.
                let g = self.task_geometry(s);
                if g.p_g.distance(g.p_h) >= a.claw_length {
                    s.gripper.weld = None;
                    (old - travel).max(a.opening_min)
                } else {
                    old
                }
            } else {
                let seat =
                    (2.0 * (s.tool.handle_half_width + a.claw_half_thickness)).max(a.opening_min);
                if self.grasp_gate(s) && old >= seat {
                    s.gripper.seating = true;
                    let new = (old - travel).max(seat);
                    if new <= seat {
                        s.gripper.weld = Some(self.make_weld(s));
                    }
                    new
                } else {
                    self.unpinched_opening(s, old, (old - travel).max(a.opening_min))
                }
            }
        } else {
            s.gripper.weld = None;
            (old + travel).min(a.opening_max)
        };
        s.gripper.opening = new;
        s.gripper.opening_rate = (new - old) / h;
    }

    /// True when both claws at `opening` overlap the same tool or object.
    fn pinches(&self, s: &WorldState, opening: f64) -> bool {
        let gt = s.bodies[GRIPPER].transform();
        let claws = self
            .arm
            .claws_local(opening)
            .map(|c| Shape::Polygon(c.transformed(&gt)));
        let tt = s.bodies[TOOL].transform();
        let mut targets: Vec<Vec<Shape>> = Vec::with_capacity(2);
        targets.push(
            self.tool_layout(s.tool.kind)
                .pieces
                .iter()
                .map(|p| Shape::Polygon(p.transformed(&tt)))
                .collect(),
        );
        targets.push(alloc::vec![Shape::Circle {
            center: s.bodies[OBJECT].position,
            radius: self.cfg.object.radius,
        }]);
        targets.iter().any(|pieces| {
            claws.iter().all(|c| {
                pieces
                    .iter()
                    .any(|p| collide(c, p, 0.0).iter().any(|m| m.separation < 0.0))
            })
        })
    }

    /// Claws closing from `old` toward `target` stop where they first pinch
    /// something between them.
    fn unpinched_opening(&self, s: &WorldState, old: f64, target: f64) -> f64 {
        if !self.pinches(s, target) {
            return target;
        }
        let (mut free, mut blocked) = (old, target);
        if self.pinches(s, old) {
            // Already squeezing something: it pushes the claws back open.
            free = (old + (old - target)).min(self.cfg.arm.opening_max);
            if self.pinches(s, free) {
                return free;
            }
            blocked = old;
        }
        for _ in 0..12 {
            let mid = 0.5 * (free + blocked);
            if self.pinches(s, mid) {
                blocked = mid;
            } else {
                free = mid;
            }
        }
        free
    }

    fn make_weld(&self, s: &WorldState) -> GripWeld {
        let tl = self.tool_layout(s.tool.kind);
        let tt = s.bodies[TOOL].transform();
        let gt = s.bodies[GRIPPER].transform();
        let anchor_world = tt.apply(tl.handle_mid);
        GripWeld {
            anchor_gripper: gt.apply_inv(anchor_world),
            anchor_tool: tl.handle_mid,
            reference_angle: s.bodies[TOOL].angle - s.bodies[GRIPPER].angle,
        }
    }

    /// Advances the world by one control step.
    ///
    /// `command[0..3]` are joint torques (clamped to the configured limits);
    /// `command[3] > 0` closes the gripper, otherwise it opens.
    pub fn step_world(
        &self,
        state: &WorldState,
        command: [f64; 4],
        dt: f64,
    ) -> Result<WorldState, PhysicsError> {
        if !command.iter().all(|c| c.is_finite()) {
            return Err(PhysicsError::InvalidInput("command must be finite"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PhysicsError::InvalidInput("dt must be positive"));
        }
        for (id, b) in BodyId::DYNAMIC.iter().zip(&state.bodies) {
            if !b.is_finite() {
                return Err(PhysicsError::Diverged {
                    body: *id,
                    tick: state.tick,
                });
            }
        }
        let lim = &self.cfg.arm.torque_limits;
        let torques: [f64; 3] = core::array::from_fn(|j| command[j].clamp(-lim[j], lim[j]));
        let close = command[3] > 0.0;
        let mut s = state.clone();
        s.contacts.clear();
        s.tick += 1;
        let n = self.cfg.solver.substeps;
        let h = dt / n as f64;
        for k in 0..n {
            self.substep(&mut s, torques, close, h, k);
            for (id, b) in BodyId::DYNAMIC.iter().zip(&s.bodies) {
                if !b.is_finite() {
                    return Err(PhysicsError::Diverged {
                        body: *id,
                        tick: s.tick,
                    });
                }
            }
        }
        Ok(s)
    }

    fn substep(&self, s: &mut WorldState, torques: [f64; 3], close: bool, h: f64, k: u32) {
        self.update_gripper(s, close, h);
        let inv = InvMass::of(&s.bodies);
        self.apply_forces(s, torques, &inv, h);

        let suppress = s.gripper.weld.is_some() || s.gripper.seating;
        let kind = s.tool.kind;
        let solver = &self.cfg.solver;

        // Velocity rows.
        let mut points = [None; 3];
        let mut angles: [Option<AngleRow>; 3] = [None; 3];
        for (j, jd) in self.joints.iter().enumerate() {
            let (ra, rb) = self.joint_arms(&s.bodies, jd);
            points[j] = Some(PointRow {
                a: jd.parent,
                b: Some(jd.child),
                ra,
                rb,
                k_inv: point_mass_inverse(&inv, jd.parent, Some(jd.child), ra, rb),
            });
            angles[j] = self.angle_row(&s.bodies, jd, &inv);
        }
        let mut weld_rows = s
            .gripper
            .weld
            .map(|w| self.weld_rows(&s.bodies, &w, &inv, h));

        let cols = self.colliders(&s.bodies, kind, s.gripper.opening);
        let mut contacts = Vec::new();
        let mut meta = Vec::new();
        for (i, ca) in cols.iter().enumerate() {
            for cb in &cols[i + 1..] {
                if !pair_collides(ca.body, cb.body, suppress) {
                    continue;
                }
                let margin = solver.contact_margin
                    + h * (motion_bound(&s.bodies, ca) + motion_bound(&s.bodies, cb));
                for mp in collide(&ca.shape, &cb.shape, margin).iter() {
                    let ra = ca
                        .index
                        .map_or(Vec2::ZERO, |x| mp.point - s.bodies[x].position);
                    let rb = cb
                        .index
                        .map_or(Vec2::ZERO, |x| mp.point - s.bodies[x].position);
                    let vn =
                        super::solver::relative_velocity(&s.bodies, ca.index, cb.index, ra, rb)
                            .dot(mp.normal);
                    // A gap may close within the substep but not beyond.
                    let bias = if mp.separation > 0.0 {
                        -mp.separation / h
                    } else if vn < -0.05 {
                        -self.cfg.restitution * vn
                    } else {
                        0.0
                    };
                    contacts.push(ContactRow {
                        a: ca.index,
                        b: cb.index,
                        ra,
                        rb,
                        normal: mp.normal,
                        normal_mass: row_mass(&inv, ca.index, cb.index, ra, rb, mp.normal),
                        tangent_mass: row_mass(&inv, ca.index, cb.index, ra, rb, mp.normal.perp()),
                        friction: self.cfg.friction,
                        bias,
                        normal_impulse: 0.0,
                        tangent_impulse: 0.0,
                    });
                    meta.push((ca.body, cb.body, ca.part, cb.part, mp.point, mp.separation));
                }
            }
        }

        let mut weld_saturated = false;
        for _ in 0..solver.velocity_iterations {
            for j in 0..3 {
                if let Some(p) = &points[j] {
                    p.solve(&mut s.bodies, &inv);
                }
                if let Some(a) = &mut angles[j] {
                    a.solve(&mut s.bodies, &inv);
                }
            }
            if let Some(rows) = &mut weld_rows {
                weld_saturated = false;
                for r in rows.iter_mut() {
                    weld_saturated |= r.solve(&mut s.bodies, &inv);
                }
            }
            for c in &mut contacts {
                c.solve(&mut s.bodies, &inv);
            }
        }
        for (c, m) in contacts.iter().zip(&meta) {
            debug_assert!(!(abs(c.tangent_impulse) > c.friction * c.normal_impulse));
            s.contacts.push(ContactPoint {
                bodies: (m.0, m.1),
                parts: (m.2, m.3),
                point: m.4,
                normal: c.normal,
                penetration: (-m.5).max(0.0),
                friction: c.friction,
                normal_impulse: c.normal_impulse,
                friction_impulse: c.tangent_impulse,
                substep: k,
            });
        }

        for b in &mut s.bodies {
            b.position += b.linear_velocity * h;
            b.angle += b.angular_velocity * h;
        }

        // Extra passes only while some overlap is still near the slop.
        let max_passes = solver.position_iterations * 8;
        for pass in 0..max_passes {
            let deepest = self.correct_positions(s, &inv, weld_saturated);
            if pass + 1 >= solver.position_iterations && deepest <= 0.5 * solver.penetration_slop {
                break;
            }
        }
        if weld_saturated {
            // The hold slipped this substep: the new relative pose is the grip.
            if let Some(w) = s.gripper.weld.as_mut() {
                let gt = s.bodies[GRIPPER].transform();
                let tt = s.bodies[TOOL].transform();
                w.anchor_gripper = gt.apply_inv(tt.apply(w.anchor_tool));
                w.reference_angle = s.bodies[TOOL].angle - s.bodies[GRIPPER].angle;
            }
        }
    }

    fn apply_forces(&self, s: &mut WorldState, torques: [f64; 3], inv: &InvMass, h: f64) {
        for (j, jd) in self.joints.iter().enumerate() {
            apply_angular_impulse(
                &mut s.bodies,
                inv,
                jd.parent,
                Some(jd.child),
                torques[j] * h,
            );
        }
        match self.cfg.gravity_mode {
            GravityMode::InPlane => {
                for b in &mut s.bodies {
                    b.linear_velocity.y -= self.cfg.gravity * h;
                }
            }
            GravityMode::OutOfPlane => {
                let decel = self.cfg.friction * self.cfg.gravity * h;
                for i in [TOOL, OBJECT] {
                    floor_friction(&mut s.bodies[i], decel);
                }
            }
        }
        // Implicit viscous joint damping on the relative rate.
        for jd in &self.joints {
            if jd.damping <= 0.0 {
                continue;
            }
            let k = inv.i(jd.parent) + inv.i(Some(jd.child));
            let wa = jd.parent.map_or(0.0, |p| s.bodies[p].angular_velocity);
            let rel = s.bodies[jd.child].angular_velocity - wa;
            let l = -jd.damping * h * rel / (1.0 + jd.damping * h * k);
            apply_angular_impulse(&mut s.bodies, inv, jd.parent, Some(jd.child), l);
        }
    }

    fn joint_arms(&self, bodies: &Bodies, jd: &JointDef) -> (Vec2, Vec2) {
        let ra = match jd.parent {
            Some(p) => Rot::new(bodies[p].angle).apply(jd.anchor_parent),
            None => Vec2::ZERO,
        };
        let rb = Rot::new(bodies[jd.child].angle).apply(jd.anchor_child);
        (ra, rb)
    }

    fn relative_angle(&self, bodies: &Bodies, jd: &JointDef) -> f64 {
        let pa = jd.parent.map_or(0.0, |p| bodies[p].angle);
        wrap_angle(bodies[jd.child].angle - pa)
    }

    fn angle_row(&self, bodies: &Bodies, jd: &JointDef, inv: &InvMass) -> Option<AngleRow> {
        let q = self.relative_angle(bodies, jd);
        let bound = if jd.locked_at.is_some() {
            AngleBound::Equal
        } else if q <= jd.limits[0] {
            AngleBound::Lower
        } else if q >= jd.limits[1] {
            AngleBound::Upper
        } else {
            return None;
        };
        let k = inv.i(jd.parent) + inv.i(Some(jd.child));
        Some(AngleRow {
            a: jd.parent,
            b: Some(jd.child),
            mass: if k > 0.0 { 1.0 / k } else { 0.0 },
            bound,
            impulse: 0.0,
        })
    }

    fn weld_rows(&self, bodies: &Bodies, w: &GripWeld, inv: &InvMass, h: f64) -> [WeldRow; 3] {
        let a = &self.cfg.arm;
        let squeeze = 2.0 * a.grip_force * a.grip_friction * h;
        let ra = Rot::new(bodies[GRIPPER].angle).apply(w.anchor_gripper);
        let rb = Rot::new(bodies[TOOL].angle).apply(w.anchor_tool);
        let lin = |axis: Vec2| WeldRow {
            a: GRIPPER,
            b: TOOL,
            ra,
            rb,
            axis: Some(axis),
            mass: row_mass(inv, Some(GRIPPER), Some(TOOL), ra, rb, axis),
            max_impulse: squeeze,
            impulse: 0.0,
        };
        let k = inv.i[GRIPPER] + inv.i[TOOL];
        [
            lin(Vec2::new(1.0, 0.0)),
            lin(Vec2::new(0.0, 1.0)),
            WeldRow {
                a: GRIPPER,
                b: TOOL,
                ra,
                rb,
                axis: None,
                mass: 1.0 / k,
                max_impulse: squeeze * 0.5 * a.claw_length,
                impulse: 0.0,
            },
        ]
    }

    /// One positional pass over joints, weld and contacts. Returns the
    /// deepest contact overlap found before correcting it.
    fn correct_positions(&self, s: &mut WorldState, inv: &InvMass, weld_slipped: bool) -> f64 {
        let bodies = &mut s.bodies;
        for jd in &self.joints {
            let (ra, rb) = self.joint_arms(bodies, jd);
            let pa = jd
                .parent
                .map_or(jd.anchor_parent, |p| bodies[p].position + ra);
            let c = bodies[jd.child].position + rb - pa;
            let k_inv = point_mass_inverse(inv, jd.parent, Some(jd.child), ra, rb);
            let p = -mat_mul(&k_inv, c);
            shift(bodies, inv, jd.parent, Some(jd.child), ra, rb, p);

            let q = self.relative_angle(bodies, jd);
            let c = match jd.locked_at {
                Some(reference) => wrap_angle(q - reference),
                None if q < jd.limits[0] => q - jd.limits[0],
                None if q > jd.limits[1] => q - jd.limits[1],
                None => 0.0,
            };
            if c != 0.0 {
                let k = inv.i(jd.parent) + inv.i(Some(jd.child));
                let l = -c / k;
                if let Some(pi) = jd.parent {
                    bodies[pi].angle -= inv.i[pi] * l;
                }
                bodies[jd.child].angle += inv.i[jd.child] * l;
            }
        }

        if let (Some(w), false) = (s.gripper.weld, weld_slipped) {
            let ra = Rot::new(bodies[GRIPPER].angle).apply(w.anchor_gripper);
            let rb = Rot::new(bodies[TOOL].angle).apply(w.anchor_tool);
            let c = bodies[TOOL].position + rb - bodies[GRIPPER].position - ra;
            let k_inv = point_mass_inverse(inv, Some(GRIPPER), Some(TOOL), ra, rb);
            shift(
                bodies,
                inv,
                Some(GRIPPER),
                Some(TOOL),
                ra,
                rb,
                -mat_mul(&k_inv, c),
            );
            let c = wrap_angle(bodies[TOOL].angle - bodies[GRIPPER].angle - w.reference_angle);
            let l = -c / (inv.i[GRIPPER] + inv.i[TOOL]);
            bodies[GRIPPER].angle -= inv.i[GRIPPER] * l;
            bodies[TOOL].angle += inv.i[TOOL] * l;
        }

        let solver = &self.cfg.solver;
        let suppress = s.gripper.weld.is_some() || s.gripper.seating;
        let cols = self.colliders(bodies, s.tool.kind, s.gripper.opening);
        let mut deepest: f64 = 0.0;
        for (i, ca) in cols.iter().enumerate() {
            for cb in &cols[i + 1..] {
                if !pair_collides(ca.body, cb.body, suppress) {
                    continue;
                }
                for mp in collide(&ca.shape, &cb.shape, 0.0).iter() {
                    deepest = deepest.max(-mp.separation);
                    let c = (solver.baumgarte * (mp.separation + solver.linear_slop))
                        .clamp(-solver.max_correction, 0.0);
                    if c == 0.0 {
                        continue;
                    }
                    let ra = ca
                        .index
                        .map_or(Vec2::ZERO, |x| mp.point - bodies[x].position);
                    let rb = cb
                        .index
                        .map_or(Vec2::ZERO, |x| mp.point - bodies[x].position);
                    let m = row_mass(inv, ca.index, cb.index, ra, rb, mp.normal);
                    shift(
                        bodies,
                        inv,
                        ca.index,
                        cb.index,
                        ra,
                        rb,
                        mp.normal * (-c * m),
                    );
                }
            }
        }
        deepest
    }
}

/// Upper bound on how fast any point of the collider moves.
fn motion_bound(bodies: &Bodies, c: &Collider) -> f64 {
    let Some(i) = c.index else { return 0.0 };
    let b = &bodies[i];
    let radius = match &c.shape {
        Shape::Polygon(p) => p
            .vertices()
            .iter()
            .map(|v| v.distance(b.position))
            .fold(0.0, f64::max),
        Shape::Circle { center, radius } => center.distance(b.position) + radius,
    };
    b.linear_velocity.length() + abs(b.angular_velocity) * radius
}

/// Position-level counterpart of `apply_impulse`.
fn shift(
    bodies: &mut Bodies,
    inv: &InvMass,
    a: Option<usize>,
    b: Option<usize>,
    ra: Vec2,
    rb: Vec2,
    p: Vec2,
) {
    if let Some(k) = a {
        bodies[k].position -= p * inv.m[k];
        bodies[k].angle -= inv.i[k] * ra.cross(p);
    }
    if let Some(k) = b {
        bodies[k].position += p * inv.m[k];
        bodies[k].angle += inv.i[k] * rb.cross(p);
    }
}

/// Coulomb floor friction under out-of-plane gravity: linear speed and spin
/// each decay by a fixed amount per substep, never reversing sign. Spin uses
/// the radius of gyration as the friction lever arm.
fn floor_friction(b: &mut RigidBody, decel: f64) {
    if decel <= 0.0 {
        return;
    }
    let speed = b.linear_velocity.length();
    if speed <= decel {
        b.linear_velocity = Vec2::ZERO;
    } else {
        b.linear_velocity *= 1.0 - decel / speed;
    }
    let gyration = sqrt(b.inertia / b.mass);
    let spin_decel = decel / gyration;
    let w = b.angular_velocity;
    b.angular_velocity = if abs(w) <= spin_decel {
        0.0
    } else {
        w - spin_decel * w.signum()
    };
}

#[allow(dead_code)]
fn _assert_apply_impulse_used() {
    let _ = apply_impulse;
}
