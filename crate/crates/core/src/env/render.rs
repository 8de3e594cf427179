//! Flat-shaded software rasterizer producing the policy's camera frames.
//!
//! A pixel takes a shape's colour when its centre lies inside the shape.
//! Later shapes overwrite earlier ones: walls, tool, object, arm, gripper.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{floor, Vec2};
use crate::physics::{Polygon, ToolKind, World, WorldState, OBJECT};

pub const IMAGE_WIDTH: usize = 55;
pub const IMAGE_HEIGHT: usize = 48;
pub const CHANNELS: usize = 3;
pub const FRAME_LEN: usize = CHANNELS * IMAGE_WIDTH * IMAGE_HEIGHT;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Palette {
    pub background: Rgb,
    pub wall: Rgb,
    /// The bottom wall, which is the target band.
    pub target: Rgb,
    pub link: Rgb,
    pub gripper: Rgb,
    /// Indexed by `ToolKind::index`.
    pub tools: [Rgb; 4],
    pub object: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [235, 235, 225],
            wall: [90, 90, 90],
            target: [40, 170, 60],
            link: [60, 90, 200],
            gripper: [30, 40, 120],
            tools: [
                [200, 120, 30],
                [170, 60, 160],
                [120, 50, 200],
                [200, 180, 40],
            ],
            object: [210, 40, 40],
        }
    }
}

impl Palette {
    pub fn tool(&self, kind: ToolKind) -> Rgb {
        self.tools[kind.index()]
    }
}

/// Planar RGB image stored channel-major: `data[(c * h + y) * w + x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut data = vec![0; CHANNELS * width * height];
        for (c, v) in color.iter().enumerate() {
            data[c * width * height..(c + 1) * width * height].fill(*v);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let n = self.width * self.height;
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        let n = self.width * self.height;
        let i = y * self.width + x;
        self.data[i] = color[0];
        self.data[n + i] = color[1];
        self.data[2 * n + i] = color[2];
    }

    /// Interleaved RGB rows, top row first, as used by PPM.
    pub fn to_interleaved(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in 0..self.width {
                out.extend_from_slice(&self.pixel(x, y));
            }
        }
        out
    }
}

/// World rectangle to pixel grid; image row 0 is the top of the arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub min: Vec2,
    pub max: Vec2,
    pub width: usize,
    pub height: usize,
}

impl Projection {
    /// The arena with its walls.
    pub fn for_world(world: &World, width: usize, height: usize) -> Self {
        let a = &world.config().arena;
        let t = Vec2::new(a.wall_thickness, a.wall_thickness);
        Self {
            min: a.min() - t,
            max: a.max() + t,
            width,
            height,
        }
    }

    /// Continuous image coordinates (u right, v down) of a world point.
    pub fn to_image(&self, p: Vec2) -> (f64, f64) {
        let u = (p.x - self.min.x) / (self.max.x - self.min.x) * self.width as f64;
        let v = (self.max.y - p.y) / (self.max.y - self.min.y) * self.height as f64;
        (u, v)
    }

    /// World position of a pixel centre.
    pub fn pixel_center(&self, x: usize, y: usize) -> Vec2 {
        let sx = (self.max.x - self.min.x) / self.width as f64;
        let sy = (self.max.y - self.min.y) / self.height as f64;
        Vec2::new(
            self.min.x + (x as f64 + 0.5) * sx,
            self.max.y - (y as f64 + 0.5) * sy,
        )
    }
}

pub struct Rasterizer<'a> {
    pub image: &'a mut Image,
    pub proj: Projection,
}

impl Rasterizer<'_> {
    /// Scanline fill: for each pixel row, intersect the edges with the row's
    /// centre line and fill the centres between the two crossings.
    pub fn polygon(&mut self, poly: &Polygon, color: Rgb) {
        let pts: Vec<(f64, f64)> = poly
            .vertices()
            .iter()
            .map(|p| self.proj.to_image(*p))
            .collect();
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            vmin = vmin.min(p.1);
            vmax = vmax.max(p.1);
        }
        let h = self.image.height as i64;
        let w = self.image.width as i64;
        let y0 = (floor(vmin - 0.5) as i64 + 1).max(0);
        let y1 = (floor(vmax - 0.5) as i64).min(h - 1);
        for y in y0..=y1 {
            let vc = y as f64 + 0.5;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..pts.len() {
                let a = pts[i];
                let b = pts[(i + 1) % pts.len()];
                if (a.1 <= vc && b.1 > vc) || (b.1 <= vc && a.1 > vc) {
                    let t = (vc - a.1) / (b.1 - a.1);
                    let u = a.0 + t * (b.0 - a.0);
                    lo = lo.min(u);
                    hi = hi.max(u);
                }
            }
            if lo > hi {
                continue;
            }
            let x0 = (floor(lo - 0.5) as i64 + 1).max(0);
            let x1 = (floor(hi - 0.5) as i64).min(w - 1);
            for x in x0..=x1 {
                self.image.set(x as usize, y as usize, color);
            }
        }
    }

    pub fn disc(&mut self, center: Vec2, radius: f64, color: Rgb) {
        for y in 0..self.image.height {
            for x in 0..self.image.width {
                if self.proj.pixel_center(x, y).distance(center) <= radius {
                    self.image.set(x, y, color);
                }
            }
        }
    }
}

/// Which layers `render_scene` draws; the tests use this to render empty
/// arenas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layers {
    pub tool: bool,
    pub object: bool,
    pub arm: bool,
}

impl Layers {
    pub const ALL: Layers = Layers {
        tool: true,
        object: true,
        arm: true,
    };
    pub const NONE: Layers = Layers {
        tool: false,
        object: false,
        arm: false,
    };
}

pub fn render_scene(
    world: &World,
    state: &WorldState,
    palette: &Palette,
    width: usize,
    height: usize,
    layers: Layers,
) -> Image {
    let mut image = Image::filled(width, height, palette.background);
    let proj = Projection::for_world(world, width, height);
    let mut r = Rasterizer {
        image: &mut image,
        proj,
    };
    for (i, w) in world.walls().iter().enumerate() {
        r.polygon(w, if i == 0 { palette.target } else { palette.wall });
    }
    if layers.tool {
        let c = palette.tool(state.tool.kind);
        for p in world.tool_polygons(state) {
            r.polygon(&p, c);
        }
    }
    if layers.object {
        r.disc(
            state.bodies[OBJECT].position,
            world.config().object.radius,
            palette.object,
        );
    }
    if layers.arm {
        let arm = world.arm_polygons(state);
        for p in &arm[..3] {
            r.polygon(p, palette.link);
        }
        for p in &arm[3..] {
            r.polygon(p, palette.gripper);
        }
    }
    image
}

/// The 55x48 policy camera frame.
pub fn render_frame(world: &World, state: &WorldState, palette: &Palette) -> Image {
    render_scene(
        world,
        state,
        palette,
        IMAGE_WIDTH,
        IMAGE_HEIGHT,
        Layers::ALL,
    )
}
