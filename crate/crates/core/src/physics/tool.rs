//! Tool shapes. Each tool is a rigid union of rectangles: a handle plus an
//! optional crossbar at the working end.
//!
//! Design frame: the handle runs along +x from `-L/2` (grip end) to `+L/2`
//! (working end), centred on the origin. The T crossbar sits beyond the
//! working end, spanning both sides of the axis; an L crossbar spans only one
//! side. `LRight` hooks toward -y (to the right of the handle direction),
//! `LLeft` toward +y.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::shape::{composite_mass, Polygon};
use super::ToolConfig;
use crate::math::{Transform, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToolKind {
    T,
    #[serde(rename = "L-right")]
    LRight,
    #[serde(rename = "L-left")]
    LLeft,
    I,
}

impl ToolKind {
    pub const ALL: [ToolKind; 4] = [ToolKind::T, ToolKind::LRight, ToolKind::LLeft, ToolKind::I];

    pub fn index(self) -> usize {
        match self {
            ToolKind::T => 0,
            ToolKind::LRight => 1,
            ToolKind::LLeft => 2,
            ToolKind::I => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToolKind::T => "T",
            ToolKind::LRight => "L-right",
            ToolKind::LLeft => "L-left",
            ToolKind::I => "I",
        }
    }

    pub fn parse(s: &str) -> Option<ToolKind> {
        ToolKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }

    pub fn is_l(self) -> bool {
        matches!(self, ToolKind::LRight | ToolKind::LLeft)
    }

    pub fn has_crossbar(self) -> bool {
        self != ToolKind::I
    }
}

/// Which rectangle of the tool a contact touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToolPart {
    Handle,
    Crossbar,
}

impl ToolPart {
    pub fn from_index(i: u8) -> ToolPart {
        if i == 0 {
            ToolPart::Handle
        } else {
            ToolPart::Crossbar
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolShape {
    pub kind: ToolKind,
    pub handle_length: f64,
    pub handle_half_width: f64,
    pub crossbar_length: f64,
    pub crossbar_half_width: f64,
}

impl ToolShape {
    pub fn new(kind: ToolKind, cfg: &ToolConfig) -> Self {
        Self {
            kind,
            handle_length: cfg.handle_length,
            handle_half_width: cfg.handle_half_width,
            crossbar_length: cfg.crossbar_length,
            crossbar_half_width: cfg.crossbar_half_width,
        }
    }

    /// Rectangles in the design frame, handle first.
    pub fn design_pieces(&self) -> Vec<Polygon> {
        let half_l = 0.5 * self.handle_length;
        let mut out = Vec::with_capacity(2);
        out.push(Polygon::rect(
            Vec2::ZERO,
            Vec2::new(half_l, self.handle_half_width),
            0.0,
        ));
        let cx = half_l + self.crossbar_half_width;
        let hw = self.handle_half_width;
        let half_c = 0.5 * self.crossbar_length;
        match self.kind {
            ToolKind::I => {}
            ToolKind::T => out.push(Polygon::rect(
                Vec2::new(cx, 0.0),
                Vec2::new(self.crossbar_half_width, half_c),
                0.0,
            )),
            ToolKind::LLeft => out.push(Polygon::aabb(
                Vec2::new(cx - self.crossbar_half_width, -hw),
                Vec2::new(cx + self.crossbar_half_width, half_c),
            )),
            ToolKind::LRight => out.push(Polygon::aabb(
                Vec2::new(cx - self.crossbar_half_width, -half_c),
                Vec2::new(cx + self.crossbar_half_width, hw),
            )),
        }
        out
    }

    /// End-effector point in the design frame: crossbar centre for T, hook
    /// end for L, far handle end for I.
    pub fn design_tip(&self) -> Vec2 {
        let half_l = 0.5 * self.handle_length;
        let cx = half_l + self.crossbar_half_width;
        let half_c = 0.5 * self.crossbar_length;
        match self.kind {
            ToolKind::T => Vec2::new(cx, 0.0),
            ToolKind::LLeft => Vec2::new(cx, half_c),
            ToolKind::LRight => Vec2::new(cx, -half_c),
            ToolKind::I => Vec2::new(half_l, 0.0),
        }
    }

    /// Unit direction of the hook in the design frame (L tools only).
    pub fn design_hook_direction(&self) -> Option<Vec2> {
        match self.kind {
            ToolKind::LLeft => Some(Vec2::new(0.0, 1.0)),
            ToolKind::LRight => Some(Vec2::new(0.0, -1.0)),
            _ => None,
        }
    }

    pub fn layout(&self, mass: f64) -> ToolLayout {
        let design = self.design_pieces();
        let area: f64 = design.iter().map(|p| p.mass_data().0).sum();
        let (m, com, inertia) = composite_mass(&design, mass / area);
        let shift = -com;
        ToolLayout {
            pieces: design.iter().map(|p| p.translated(shift)).collect(),
            mass: m,
            inertia,
            design_com: com,
            handle_mid: shift,
            tip: self.design_tip() + shift,
            hook_root: Vec2::new(0.5 * self.handle_length + self.crossbar_half_width, 0.0) + shift,
            hook_direction: self.design_hook_direction(),
        }
    }
}

/// Geometry of a tool in its body frame (origin at the centre of mass).
#[derive(Debug, Clone, PartialEq)]
pub struct ToolLayout {
    pub pieces: Vec<Polygon>,
    pub mass: f64,
    pub inertia: f64,
    /// Centre of mass in the design frame.
    pub design_com: Vec2,
    pub handle_mid: Vec2,
    pub tip: Vec2,
    /// Where the crossbar meets the handle axis.
    pub hook_root: Vec2,
    pub hook_direction: Option<Vec2>,
}

impl ToolLayout {
    pub fn world_pieces(&self, t: &Transform) -> impl Iterator<Item = (ToolPart, Polygon)> + '_ {
        let t = *t;
        self.pieces
            .iter()
            .enumerate()
            .map(move |(i, p)| (ToolPart::from_index(i as u8), p.transformed(&t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piece_counts_by_kind() {
        let cfg = ToolConfig::default();
        assert_eq!(ToolShape::new(ToolKind::I, &cfg).design_pieces().len(), 1);
        for k in [ToolKind::T, ToolKind::LLeft, ToolKind::LRight] {
            assert_eq!(ToolShape::new(k, &cfg).design_pieces().len(), 2);
        }
    }

    #[test]
    fn i_tool_tip_is_far_handle_end() {
        let cfg = ToolConfig::default();
        let s = ToolShape::new(ToolKind::I, &cfg);
        assert_eq!(s.design_tip(), Vec2::new(0.15, 0.0));
        let lay = s.layout(cfg.mass);
        // Symmetric handle: the centre of mass is the handle midpoint.
        assert!(lay.design_com.length() < 1e-15);
        assert!((lay.tip - Vec2::new(0.15, 0.0)).length() < 1e-15);
    }

    #[test]
    fn layout_mass_is_configured() {
        let cfg = ToolConfig::default();
        for k in ToolKind::ALL {
            let lay = ToolShape::new(k, &cfg).layout(cfg.mass);
            assert!((lay.mass - cfg.mass).abs() < 1e-14);
            assert!(lay.inertia > 0.0);
        }
    }

    #[test]
    fn l_tools_mirror() {
        let cfg = ToolConfig::default();
        let l = ToolShape::new(ToolKind::LLeft, &cfg).layout(cfg.mass);
        let r = ToolShape::new(ToolKind::LRight, &cfg).layout(cfg.mass);
        assert!((l.design_com.x - r.design_com.x).abs() < 1e-15);
        assert!((l.design_com.y + r.design_com.y).abs() < 1e-15);
        assert!((l.inertia - r.inertia).abs() < 1e-15);
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in ToolKind::ALL {
            assert_eq!(ToolKind::parse(k.name()), Some(k));
        }
        assert_eq!(ToolKind::parse("x"), None);
    }
}
