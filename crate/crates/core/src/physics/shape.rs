//! Convex polygons, discs and their mass properties.

use crate::math::{Transform, Vec2};

pub const MAX_POLYGON_VERTICES: usize = 8;

/// Convex polygon with counter-clockwise vertices and outward edge normals.
///
/// Edge `i` runs from `vertices[i]` to `vertices[(i + 1) % count]` and has
/// outward normal `normals[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polygon {
    count: usize,
    vertices: [Vec2; MAX_POLYGON_VERTICES],
    normals: [Vec2; MAX_POLYGON_VERTICES],
}

impl Polygon {
    /// Builds a polygon from CCW convex vertices.
    ///
    /// Panics if fewer than 3 or more than [`MAX_POLYGON_VERTICES`] points are
    /// given, or if the points are not strictly convex and counter-clockwise.
    pub fn new(points: &[Vec2]) -> Self {
        let count = points.len();
        assert!(
            (3..=MAX_POLYGON_VERTICES).contains(&count),
            "polygon vertex count {count} out of range"
        );
        let mut vertices = [Vec2::ZERO; MAX_POLYGON_VERTICES];
        let mut normals = [Vec2::ZERO; MAX_POLYGON_VERTICES];
        vertices[..count].copy_from_slice(points);
        for i in 0..count {
            let a = vertices[i];
            let b = vertices[(i + 1) % count];
            let c = vertices[(i + 2) % count];
            assert!((b - a).cross(c - b) > 0.0, "polygon is not convex CCW");
            let e = b - a;
            normals[i] = Vec2::new(e.y, -e.x).normalized();
        }
        Self {
            count,
            vertices,
            normals,
        }
    }

    /// Rectangle centred at `center` with the given half extents, rotated by
    /// `angle` about its centre.
    pub fn rect(center: Vec2, half: Vec2, angle: f64) -> Self {
        let t = Transform::new(center, angle);
        let pts = [
            t.apply(Vec2::new(-half.x, -half.y)),
            t.apply(Vec2::new(half.x, -half.y)),
            t.apply(Vec2::new(half.x, half.y)),
            t.apply(Vec2::new(-half.x, half.y)),
        ];
        Self::new(&pts)
    }

    /// Axis-aligned rectangle spanning `[min, max]`.
    pub fn aabb(min: Vec2, max: Vec2) -> Self {
        Self::new(&[min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices[..self.count]
    }

    #[inline]
    pub fn normals(&self) -> &[Vec2] {
        &self.normals[..self.count]
    }

    pub fn transformed(&self, t: &Transform) -> Polygon {
        let mut out = *self;
        for i in 0..self.count {
            out.vertices[i] = t.apply(self.vertices[i]);
            out.normals[i] = t.q.apply(self.normals[i]);
        }
        out
    }

    pub fn translated(&self, d: Vec2) -> Polygon {
        let mut out = *self;
        for v in &mut out.vertices[..self.count] {
            *v += d;
        }
        out
    }

    /// Signed area, centroid and polar second moment about the centroid, per
    /// unit density.
    pub fn mass_data(&self) -> (f64, Vec2, f64) {
        // Triangle fan about the first vertex, shifted to reduce round-off.
        let origin = self.vertices[0];
        let mut area = 0.0;
        let mut center = Vec2::ZERO;
        let mut inertia = 0.0;
        const INV3: f64 = 1.0 / 3.0;
        for i in 1..self.count - 1 {
            let e1 = self.vertices[i] - origin;
            let e2 = self.vertices[i + 1] - origin;
            let d = e1.cross(e2);
            let tri_area = 0.5 * d;
            area += tri_area;
            center += (e1 + e2) * (tri_area * INV3);
            let intx2 = e1.x * e1.x + e2.x * e1.x + e2.x * e2.x;
            let inty2 = e1.y * e1.y + e2.y * e1.y + e2.y * e2.y;
            inertia += 0.25 * INV3 * d * (intx2 + inty2);
        }
        let c = center / area;
        // `inertia` is about `origin`; shift to the centroid.
        let i_centroid = inertia - area * c.length_squared();
        (area, c + origin, i_centroid)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.vertices()
            .iter()
            .zip(self.normals())
            .all(|(v, n)| n.dot(p - *v) <= 0.0)
    }

    pub fn centroid(&self) -> Vec2 {
        self.mass_data().1
    }
}

/// The shapes that occur in the arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Polygon(Polygon),
    Circle { center: Vec2, radius: f64 },
}

impl Shape {
    pub fn transformed(&self, t: &Transform) -> Shape {
        match self {
            Shape::Polygon(p) => Shape::Polygon(p.transformed(t)),
            Shape::Circle { center, radius } => Shape::Circle {
                center: t.apply(*center),
                radius: *radius,
            },
        }
    }
}

/// Combined mass, centre of mass and inertia (about that centre) of a set of
/// polygons with one areal density.
pub fn composite_mass(polys: &[Polygon], density: f64) -> (f64, Vec2, f64) {
    let mut mass = 0.0;
    let mut first_moment = Vec2::ZERO;
    let mut parts = [(0.0, Vec2::ZERO, 0.0); 8];
    assert!(polys.len() <= parts.len());
    for (slot, p) in parts.iter_mut().zip(polys) {
        let (a, c, i) = p.mass_data();
        *slot = (a * density, c, i * density);
        mass += a * density;
        first_moment += c * (a * density);
    }
    let com = first_moment / mass;
    let inertia = parts[..polys.len()]
        .iter()
        .map(|(m, c, i)| i + m * (*c - com).length_squared())
        .sum();
    (mass, com, inertia)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_mass_matches_closed_form() {
        let p = Polygon::rect(Vec2::new(0.3, -0.1), Vec2::new(0.2, 0.05), 0.4);
        let (a, c, i) = p.mass_data();
        assert!((a - 0.4 * 0.1).abs() < 1e-15);
        assert!((c - Vec2::new(0.3, -0.1)).length() < 1e-14);
        let closed = a * (0.4 * 0.4 + 0.1 * 0.1) / 12.0;
        assert!((i - closed).abs() < 1e-15);
    }

    #[test]
    fn normals_point_outward() {
        let p = Polygon::aabb(Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0));
        let c = p.centroid();
        for (v, n) in p.vertices().iter().zip(p.normals()) {
            assert!(n.dot(*v - c) > 0.0);
            assert!((n.length() - 1.0).abs() < 1e-15);
        }
        assert!(p.contains(Vec2::new(1.0, 0.5)));
        assert!(!p.contains(Vec2::new(2.5, 0.5)));
    }

    #[test]
    #[should_panic]
    fn rejects_clockwise() {
        let _ = Polygon::new(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.0),
        ]);
    }
}
