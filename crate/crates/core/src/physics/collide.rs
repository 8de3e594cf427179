//! Narrow-phase contact generation: polygon/polygon by separating axes with
//! reference-face clipping, and polygon/disc by Voronoi regions.

use super::shape::{Polygon, Shape};
use crate::math::Vec2;

/// One manifold point. `normal` points from shape A to shape B and
/// `separation` is negative when the shapes overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    pub point: Vec2,
    pub normal: Vec2,
    pub separation: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Manifold {
    pub points: [Option<ManifoldPoint>; 2],
}

impl Manifold {
    pub fn iter(&self) -> impl Iterator<Item = ManifoldPoint> + '_ {
        self.points.iter().flatten().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.points.iter().all(Option::is_none)
    }
}

/// Contact points between two world-space shapes, keeping only points whose
/// separation is at most `margin`.
pub fn collide(a: &Shape, b: &Shape, margin: f64) -> Manifold {
    match (a, b) {
        (Shape::Polygon(pa), Shape::Polygon(pb)) => collide_polygons(pa, pb, margin),
        (Shape::Polygon(p), Shape::Circle { center, radius }) => {
            collide_polygon_circle(p, *center, *radius, margin)
        }
        (Shape::Circle { center, radius }, Shape::Polygon(p)) => {
            let mut m = collide_polygon_circle(p, *center, *radius, margin);
            for mp in m.points.iter_mut().flatten() {
                mp.normal = -mp.normal;
            }
            m
        }
        (
            Shape::Circle {
                center: ca,
                radius: ra,
            },
            Shape::Circle {
                center: cb,
                radius: rb,
            },
        ) => {
            let d = *cb - *ca;
            let dist = d.length();
            let sep = dist - ra - rb;
            let mut m = Manifold::default();
            if sep <= margin {
                let n = if dist > 0.0 {
                    d / dist
                } else {
                    Vec2::new(1.0, 0.0)
                };
                let pa = *ca + n * *ra;
                let pb = *cb - n * *rb;
                m.points[0] = Some(ManifoldPoint {
                    point: pa.midpoint(pb),
                    normal: n,
                    separation: sep,
                });
            }
            m
        }
    }
}

/// Largest separation of `p2` along the edge normals of `p1`.
fn max_separation(p1: &Polygon, p2: &Polygon) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (v, n)) in p1.vertices().iter().zip(p1.normals()).enumerate() {
        let si = p2
            .vertices()
            .iter()
            .map(|w| n.dot(*w - *v))
            .fold(f64::INFINITY, f64::min);
        if si > best.1 {
            best = (i, si);
        }
    }
    best
}

fn clip_segment(input: [Vec2; 2], normal: Vec2, offset: f64) -> Option<[Vec2; 2]> {
    let d0 = normal.dot(input[0]) - offset;
    let d1 = normal.dot(input[1]) - offset;
    let mut out = [Vec2::ZERO; 2];
    let mut n = 0;
    if d0 <= 0.0 {
        out[n] = input[0];
        n += 1;
    }
    if d1 <= 0.0 {
        out[n] = input[1];
        n += 1;
    }
    if d0 * d1 < 0.0 {
        let t = d0 / (d0 - d1);
        out[n] = input[0] + (input[1] - input[0]) * t;
        n += 1;
    }
    (n == 2).then_some(out)
}

pub fn collide_polygons(pa: &Polygon, pb: &Polygon, margin: f64) -> Manifold {
    let mut m = Manifold::default();
    let (edge_a, sep_a) = max_separation(pa, pb);
    if sep_a > margin {
        return m;
    }
    let (edge_b, sep_b) = max_separation(pb, pa);
    if sep_b > margin {
        return m;
    }
    // Prefer A as reference unless B is clearly better, for frame coherence.
    let (reference, incident, ref_edge, flip) = if sep_b > sep_a + 1e-6 {
        (pb, pa, edge_b, true)
    } else {
        (pa, pb, edge_a, false)
    };
    let n_ref = reference.normals()[ref_edge];
    let inc_edge = incident
        .normals()
        .iter()
        .enumerate()
        .map(|(i, n)| (i, n.dot(n_ref)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
        .0;
    let ic = incident.count();
    let inc = [
        incident.vertices()[inc_edge],
        incident.vertices()[(inc_edge + 1) % ic],
    ];
    let rc = reference.count();
    let v1 = reference.vertices()[ref_edge];
    let v2 = reference.vertices()[(ref_edge + 1) % rc];
    let tangent = (v2 - v1).normalized();
    let Some(clip1) = clip_segment(inc, -tangent, -tangent.dot(v1)) else {
        return m;
    };
    let Some(clip2) = clip_segment(clip1, tangent, tangent.dot(v2)) else {
        return m;
    };
    let normal = if flip { -n_ref } else { n_ref };
    let mut k = 0;
    for p in clip2 {
        let sep = n_ref.dot(p - v1);
        if sep <= margin {
            m.points[k] = Some(ManifoldPoint {
                point: p - n_ref * (0.5 * sep),
                normal,
                separation: sep,
            });
            k += 1;
        }
    }
    m
}

pub fn collide_polygon_circle(p: &Polygon, c: Vec2, r: f64, margin: f64) -> Manifold {
    let mut m = Manifold::default();
    let mut edge = 0;
    let mut sep = f64::NEG_INFINITY;
    for (i, (v, n)) in p.vertices().iter().zip(p.normals()).enumerate() {
        let s = n.dot(c - *v);
        if s > sep {
            sep = s;
            edge = i;
        }
    }
    if sep > r + margin {
        return m;
    }
    let n = p.count();
    let v1 = p.vertices()[edge];
    let v2 = p.vertices()[(edge + 1) % n];
    let face = |normal: Vec2, face_sep: f64| ManifoldPoint {
        point: c - normal * (0.5 * (r + face_sep)),
        normal,
        separation: face_sep - r,
    };
    if sep <= 0.0 {
        m.points[0] = Some(face(p.normals()[edge], sep));
        return m;
    }
    let u1 = (c - v1).dot(v2 - v1);
    let u2 = (c - v2).dot(v1 - v2);
    let vertex = |v: Vec2| -> Option<ManifoldPoint> {
        let d = c - v;
        let dist = d.length();
        let s = dist - r;
        (s <= margin).then(|| {
            let normal = d / dist;
            ManifoldPoint {
                point: v.midpoint(c - normal * r),
                normal,
                separation: s,
            }
        })
    };
    m.points[0] = if u1 <= 0.0 {
        vertex(v1)
    } else if u2 <= 0.0 {
        vertex(v2)
    } else {
        Some(face(p.normals()[edge], sep))
    };
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(center: Vec2, angle: f64) -> Polygon {
        Polygon::rect(center, Vec2::new(0.5, 0.5), angle)
    }

    #[test]
    fn stacked_boxes_two_points() {
        let a = unit_box(Vec2::new(0.0, 0.0), 0.0);
        let b = unit_box(Vec2::new(0.2, 0.99), 0.0);
        let m = collide_polygons(&a, &b, 0.0);
        let pts: alloc::vec::Vec<_> = m.iter().collect();
        assert_eq!(pts.len(), 2);
        for p in pts {
            assert!((p.normal - Vec2::new(0.0, 1.0)).length() < 1e-12);
            assert!((p.separation + 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn separated_boxes_none() {
        let a = unit_box(Vec2::new(0.0, 0.0), 0.0);
        let b = unit_box(Vec2::new(1.2, 0.0), 0.3);
        assert!(collide_polygons(&a, &b, 0.0).is_empty());
    }

    #[test]
    fn flipped_reference_keeps_a_to_b_normal() {
        // Rotated A corner pokes into flat B from above.
        let a = unit_box(Vec2::new(0.0, 0.0), 0.0);
        let b = unit_box(Vec2::new(0.0, -1.2), core::f64::consts::FRAC_PI_4);
        let m = collide_polygons(&a, &b, 0.0);
        for p in m.iter() {
            assert!(p.normal.y < 0.0, "normal must point from A to B");
        }
        assert!(!m.is_empty());
    }

    #[test]
    fn circle_face_and_corner() {
        let p = unit_box(Vec2::ZERO, 0.0);
        let m = collide_polygon_circle(&p, Vec2::new(0.0, 0.55), 0.1, 0.0);
        let mp = m.points[0].unwrap();
        assert!((mp.normal - Vec2::new(0.0, 1.0)).length() < 1e-12);
        assert!((mp.separation + 0.05).abs() < 1e-12);

        let m = collide_polygon_circle(&p, Vec2::new(0.55, 0.55), 0.1, 0.0);
        let mp = m.points[0].unwrap();
        let expect = Vec2::new(1.0, 1.0).normalized();
        assert!((mp.normal - expect).length() < 1e-12);
        assert!((mp.separation - (0.05 * core::f64::consts::SQRT_2 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn circle_shape_order_flips_normal() {
        let p = Shape::Polygon(unit_box(Vec2::ZERO, 0.0));
        let c = Shape::Circle {
            center: Vec2::new(0.0, 0.55),
            radius: 0.1,
        };
        let m1 = collide(&p, &c, 0.0).points[0].unwrap();
        let m2 = collide(&c, &p, 0.0).points[0].unwrap();
        assert!((m1.normal + m2.normal).length() < 1e-15);
    }
}
