//! Sequential-impulse constraint rows.
//!
//! Every velocity row is a clamped one- or two-dimensional projection with a
//! zero velocity target (restitution aside), so with zero restitution an
//! iteration never adds kinetic energy. Penetration and joint drift are
//! removed by a separate positional pass that leaves velocities untouched.

use super::world::{RigidBody, BODY_COUNT};
use crate::math::Vec2;

pub(super) type Bodies = [RigidBody; BODY_COUNT];

#[derive(Debug, Clone, Copy)]
pub(super) struct InvMass {
    pub m: [f64; BODY_COUNT],
    pub i: [f64; BODY_COUNT],
}

impl InvMass {
    pub fn of(bodies: &Bodies) -> Self {
        let mut m = [0.0; BODY_COUNT];
        let mut i = [0.0; BODY_COUNT];
        for (k, b) in bodies.iter().enumerate() {
            m[k] = 1.0 / b.mass;
            i[k] = 1.0 / b.inertia;
        }
        Self { m, i }
    }

    #[inline]
    pub fn m(&self, b: Option<usize>) -> f64 {
        b.map_or(0.0, |k| self.m[k])
    }

    #[inline]
    pub fn i(&self, b: Option<usize>) -> f64 {
        b.map_or(0.0, |k| self.i[k])
    }
}

#[inline]
fn velocity(bodies: &Bodies, b: Option<usize>) -> (Vec2, f64) {
    b.map_or((Vec2::ZERO, 0.0), |k| {
        (bodies[k].linear_velocity, bodies[k].angular_velocity)
    })
}

#[inline]
pub(super) fn relative_velocity(
    bodies: &Bodies,
    a: Option<usize>,
    b: Option<usize>,
    ra: Vec2,
    rb: Vec2,
) -> Vec2 {
    let (va, wa) = velocity(bodies, a);
    let (vb, wb) = velocity(bodies, b);
    vb + Vec2::cross_scalar(wb, rb) - va - Vec2::cross_scalar(wa, ra)
}

#[inline]
pub(super) fn apply_impulse(
    bodies: &mut Bodies,
    inv: &InvMass,
    a: Option<usize>,
    b: Option<usize>,
    ra: Vec2,
    rb: Vec2,
    p: Vec2,
) {
    if let Some(k) = a {
        bodies[k].linear_velocity -= p * inv.m[k];
        bodies[k].angular_velocity -= inv.i[k] * ra.cross(p);
    }
    if let Some(k) = b {
        bodies[k].linear_velocity += p * inv.m[k];
        bodies[k].angular_velocity += inv.i[k] * rb.cross(p);
    }
}

#[inline]
pub(super) fn apply_angular_impulse(
    bodies: &mut Bodies,
    inv: &InvMass,
    a: Option<usize>,
    b: Option<usize>,
    l: f64,
) {
    if let Some(k) = a {
        bodies[k].angular_velocity -= inv.i[k] * l;
    }
    if let Some(k) = b {
        bodies[k].angular_velocity += inv.i[k] * l;
    }
}

/// Inverse of the 2x2 point-constraint mass matrix.
pub(super) fn point_mass_inverse(
    inv: &InvMass,
    a: Option<usize>,
    b: Option<usize>,
    ra: Vec2,
    rb: Vec2,
) -> [f64; 4] {
    let (ma, mb, ia, ib) = (inv.m(a), inv.m(b), inv.i(a), inv.i(b));
    let k11 = ma + mb + ia * ra.y * ra.y + ib * rb.y * rb.y;
    let k12 = -ia * ra.x * ra.y - ib * rb.x * rb.y;
    let k22 = ma + mb + ia * ra.x * ra.x + ib * rb.x * rb.x;
    let det = k11 * k22 - k12 * k12;
    let inv_det = if det != 0.0 { 1.0 / det } else { 0.0 };
    [k22 * inv_det, -k12 * inv_det, -k12 * inv_det, k11 * inv_det]
}

#[inline]
pub(super) fn mat_mul(k: &[f64; 4], v: Vec2) -> Vec2 {
    Vec2::new(k[0] * v.x + k[1] * v.y, k[2] * v.x + k[3] * v.y)
}

/// Effective mass of a 1-D row along direction `d`.
pub(super) fn row_mass(
    inv: &InvMass,
    a: Option<usize>,
    b: Option<usize>,
    ra: Vec2,
    rb: Vec2,
    d: Vec2,
) -> f64 {
    let rna = ra.cross(d);
    let rnb = rb.cross(d);
    let k = inv.m(a) + inv.m(b) + inv.i(a) * rna * rna + inv.i(b) * rnb * rnb;
    if k > 0.0 {
        1.0 / k
    } else {
        0.0
    }
}

/// Velocity-level revolute joint (2-D point block).
#[derive(Debug, Clone, Copy)]
pub(super) struct PointRow {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub ra: Vec2,
    pub rb: Vec2,
    pub k_inv: [f64; 4],
}

impl PointRow {
    pub fn solve(&self, bodies: &mut Bodies, inv: &InvMass) {
        let cdot = relative_velocity(bodies, self.a, self.b, self.ra, self.rb);
        let p = -mat_mul(&self.k_inv, cdot);
        apply_impulse(bodies, inv, self.a, self.b, self.ra, self.rb, p);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum AngleBound {
    /// Relative angular velocity may only increase.
    Lower,
    /// Relative angular velocity may only decrease.
    Upper,
    Equal,
}

/// Angular row used for joint limits and locked joints.
#[derive(Debug, Clone, Copy)]
pub(super) struct AngleRow {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub mass: f64,
    pub bound: AngleBound,
    pub impulse: f64,
}

impl AngleRow {
    pub fn solve(&mut self, bodies: &mut Bodies, inv: &InvMass) {
        let (_, wa) = velocity(bodies, self.a);
        let (_, wb) = velocity(bodies, self.b);
        let lambda = -self.mass * (wb - wa);
        let old = self.impulse;
        self.impulse = match self.bound {
            AngleBound::Lower => (old + lambda).max(0.0),
            AngleBound::Upper => (old + lambda).min(0.0),
            AngleBound::Equal => old + lambda,
        };
        apply_angular_impulse(bodies, inv, self.a, self.b, self.impulse - old);
    }
}

/// One axis of the friction-limited grip weld.
#[derive(Debug, Clone, Copy)]
pub(super) struct WeldRow {
    pub a: usize,
    pub b: usize,
    pub ra: Vec2,
    pub rb: Vec2,
    /// Axis for linear rows; `None` for the angular row.
    pub axis: Option<Vec2>,
    pub mass: f64,
    pub max_impulse: f64,
    pub impulse: f64,
}

impl WeldRow {
    /// Returns true when the accumulated impulse sits on its friction limit.
    pub fn solve(&mut self, bodies: &mut Bodies, inv: &InvMass) -> bool {
        let (a, b) = (Some(self.a), Some(self.b));
        let cdot = match self.axis {
            Some(d) => relative_velocity(bodies, a, b, self.ra, self.rb).dot(d),
            None => bodies[self.b].angular_velocity - bodies[self.a].angular_velocity,
        };
        let old = self.impulse;
        let unclamped = old - self.mass * cdot;
        self.impulse = unclamped.clamp(-self.max_impulse, self.max_impulse);
        let delta = self.impulse - old;
        match self.axis {
            Some(d) => apply_impulse(bodies, inv, a, b, self.ra, self.rb, d * delta),
            None => apply_angular_impulse(bodies, inv, a, b, delta),
        }
        self.impulse != unclamped
    }
}

/// Non-penetration plus Coulomb friction at one contact point.
#[derive(Debug, Clone, Copy)]
pub(super) struct ContactRow {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub ra: Vec2,
    pub rb: Vec2,
    pub normal: Vec2,
    pub normal_mass: f64,
    pub tangent_mass: f64,
    pub friction: f64,
    pub bias: f64,
    pub normal_impulse: f64,
    pub tangent_impulse: f64,
}

impl ContactRow {
    pub fn solve(&mut self, bodies: &mut Bodies, inv: &InvMass) {
        // Normal first so the friction bound below uses this iteration's
        // final normal impulse.
        let dv = relative_velocity(bodies, self.a, self.b, self.ra, self.rb);
        let vn = dv.dot(self.normal);
        let lambda = -self.normal_mass * (vn - self.bias);
        let new = (self.normal_impulse + lambda).max(0.0);
        let delta = new - self.normal_impulse;
        self.normal_impulse = new;
        apply_impulse(
            bodies,
            inv,
            self.a,
            self.b,
            self.ra,
            self.rb,
            self.normal * delta,
        );

        let tangent = self.normal.perp();
        let dv = relative_velocity(bodies, self.a, self.b, self.ra, self.rb);
        let vt = dv.dot(tangent);
        let lambda = -self.tangent_mass * vt;
        let max_f = self.friction * self.normal_impulse;
        let new = (self.tangent_impulse + lambda).clamp(-max_f, max_f);
        let delta = new - self.tangent_impulse;
        self.tangent_impulse = new;
        apply_impulse(
            bodies,
            inv,
            self.a,
            self.b,
            self.ra,
            self.rb,
            tangent * delta,
        );
    }
}
