//! Arm geometry: three rectangular links, the last one carrying the palm and
//! two sliding claws.
//!
//! Each link's design frame has its proximal joint at the origin and runs
//! along +x to the distal joint at `(length, 0)`. Body frames are the design
//! frames shifted so the centre of mass is at the origin.

use super::shape::{composite_mass, Polygon};
use super::ArmConfig;
use crate::math::{Transform, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkLayout {
    pub length: f64,
    pub mass: f64,
    pub inertia: f64,
    /// Centre of mass in the design frame.
    pub design_com: Vec2,
    /// Joint to the parent, body frame.
    pub proximal: Vec2,
    /// Joint to the child (or the wrist for the last link), body frame.
    pub distal: Vec2,
    /// Link bar, body frame.
    pub bar: Polygon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmLayout {
    pub links: [LinkLayout; 3],
    /// Palm plate on the last link, body frame.
    pub palm: Polygon,
    /// x of the claw roots in the last link's body frame.
    claw_root_x: f64,
    /// y offset of the last link's centre of mass in its design frame.
    claw_axis_y: f64,
    claw_length: f64,
    claw_half_thickness: f64,
}

impl ArmLayout {
    pub fn new(cfg: &ArmConfig) -> Self {
        let hw = cfg.link_half_width;
        let build = |i: usize, extra: Option<Polygon>| {
            let len = cfg.link_lengths[i];
            let bar = Polygon::aabb(Vec2::new(0.0, -hw), Vec2::new(len, hw));
            let (mass, com, inertia) = match extra {
                Some(p) => composite_mass(&[bar, p], cfg.density),
                None => composite_mass(&[bar], cfg.density),
            };
            LinkLayout {
                length: len,
                mass,
                inertia,
                design_com: com,
                proximal: -com,
                distal: Vec2::new(len, 0.0) - com,
                bar: bar.translated(-com),
            }
        };
        let l3 = cfg.link_lengths[2];
        let palm_design = Polygon::aabb(
            Vec2::new(l3, -cfg.palm_half_span),
            Vec2::new(l3 + 2.0 * cfg.palm_half_depth, cfg.palm_half_span),
        );
        let links = [build(0, None), build(1, None), build(2, Some(palm_design))];
        let com3 = links[2].design_com;
        Self {
            palm: palm_design.translated(-com3),
            claw_root_x: l3 + 2.0 * cfg.palm_half_depth - com3.x,
            claw_axis_y: -com3.y,
            claw_length: cfg.claw_length,
            claw_half_thickness: cfg.claw_half_thickness,
            links,
        }
    }

    /// Distance from the shoulder to the pinch point with the arm straight.
    pub fn reach(&self) -> f64 {
        let l3 = &self.links[2];
        self.links[0].length
            + self.links[1].length
            + (self.claw_root_x + l3.design_com.x)
            + self.claw_length
    }

    pub fn claw_length(&self) -> f64 {
        self.claw_length
    }

    /// Pinch point (midpoint of the claw tips), gripper body frame.
    pub fn pinch_local(&self) -> Vec2 {
        Vec2::new(self.claw_root_x + self.claw_length, self.claw_axis_y)
    }

    /// Left (+y) and right (-y) claw tip centres, gripper body frame.
    pub fn claw_tips_local(&self, opening: f64) -> (Vec2, Vec2) {
        let p = self.pinch_local();
        (
            p + Vec2::new(0.0, 0.5 * opening),
            p - Vec2::new(0.0, 0.5 * opening),
        )
    }

    /// Left and right claw rectangles, gripper body frame.
    pub fn claws_local(&self, opening: f64) -> [Polygon; 2] {
        let cx = self.claw_root_x + 0.5 * self.claw_length;
        let half = Vec2::new(0.5 * self.claw_length, self.claw_half_thickness);
        [
            Polygon::rect(Vec2::new(cx, self.claw_axis_y + 0.5 * opening), half, 0.0),
            Polygon::rect(Vec2::new(cx, self.claw_axis_y - 0.5 * opening), half, 0.0),
        ]
    }

    /// Body poses (centre of mass position, absolute angle) for joint angles
    /// `q` measured relative to each parent.
    pub fn forward_kinematics(&self, base: Vec2, q: [f64; 3]) -> [(Vec2, f64); 3] {
        let mut joint = base;
        let mut angle = 0.0;
        let mut out = [(Vec2::ZERO, 0.0); 3];
        for (i, link) in self.links.iter().enumerate() {
            angle += q[i];
            let t = Transform::new(joint, angle);
            out[i] = (t.apply(link.design_com), angle);
            joint = t.apply(Vec2::new(link.length, 0.0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_arm_reach() {
        let cfg = ArmConfig::default();
        let lay = ArmLayout::new(&cfg);
        let expect = 0.25 + 0.20 + 0.15 + 2.0 * cfg.palm_half_depth + cfg.claw_length;
        assert!((lay.reach() - expect).abs() < 1e-14);
        let poses = lay.forward_kinematics(Vec2::ZERO, [0.0; 3]);
        let pinch = Transform::new(poses[2].0, poses[2].1).apply(lay.pinch_local());
        assert!((pinch - Vec2::new(expect, 0.0)).length() < 1e-14);
    }

    #[test]
    fn claw_tips_separated_by_opening() {
        let lay = ArmLayout::new(&ArmConfig::default());
        let (l, r) = lay.claw_tips_local(0.07);
        assert!((l.distance(r) - 0.07).abs() < 1e-15);
        assert!((l.midpoint(r) - lay.pinch_local()).length() < 1e-15);
    }

    #[test]
    fn link_mass_from_density() {
        let cfg = ArmConfig::default();
        let lay = ArmLayout::new(&cfg);
        let m1 = cfg.density * 0.25 * 2.0 * cfg.link_half_width;
        assert!((lay.links[0].mass - m1).abs() < 1e-14);
        assert!((lay.links[0].design_com - Vec2::new(0.125, 0.0)).length() < 1e-14);
    }
}
