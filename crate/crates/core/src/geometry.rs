//! Planar and spatial helpers shared by the warehouse model, the fly-zone map
//! and the renderer. Right-handed frame, Z up, meters.

pub use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

/// A position plus a heading about +Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3D {
    pub position: DVec3,
    pub yaw: f64,
}

impl Pose3D {
    pub fn new(position: DVec3, yaw: f64) -> Self {
        Self { position, yaw }
    }

    /// Unit horizontal vector the pose points along.
    pub fn heading(&self) -> DVec2 {
        DVec2::from_angle(self.yaw)
    }
}

pub fn rotate(v: DVec2, angle: f64) -> DVec2 {
    DVec2::from_angle(angle).rotate(v)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

fn cross(a: DVec2, b: DVec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn orient(a: DVec2, b: DVec2, c: DVec2) -> f64 {
    cross(b - a, c - a)
}

fn on_segment(a: DVec2, b: DVec2, p: DVec2) -> bool {
    p.x >= a.x.min(b.x) - 1e-12
        && p.x <= a.x.max(b.x) + 1e-12
        && p.y >= a.y.min(b.y) - 1e-12
        && p.y <= a.y.max(b.y) + 1e-12
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: DVec2, b: DVec2, c: DVec2, d: DVec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Proper crossing: the segments intersect at a single point interior to both.
pub fn segments_cross(a: DVec2, b: DVec2, c: DVec2, d: DVec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Whether the segment `a..b` passes through the open axis-aligned box.
pub fn segment_hits_open_box(a: DVec2, b: DVec2, min: DVec2, max: DVec2) -> bool {
    // Liang-Barsky clip against the box, then require a non-degenerate
    // piece strictly inside.
    let d = b - a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for (p, q) in [
        (-d.x, a.x - min.x),
        (d.x, max.x - a.x),
        (-d.y, a.y - min.y),
        (d.y, max.y - a.y),
    ] {
        if p == 0.0 {
            if q <= 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 >= t1 {
        return false;
    }
    let mid = a + d * ((t0 + t1) * 0.5);
    mid.x > min.x && mid.x < max.x && mid.y > min.y && mid.y < max.y
}

/// Simple polygon given by its vertices; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<DVec2>,
}

impl Polygon {
    /// Builds a polygon from a polyline, dropping a repeated closing vertex.
    pub fn from_polyline(points: &[DVec2]) -> Self {
        let mut vertices = points.to_vec();
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        Self { vertices }
    }

    pub fn vertices(&self) -> &[DVec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (DVec2, DVec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3 || self.signed_area().abs() < 1e-9
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| cross(a, b)).sum::<f64>() * 0.5
    }

    /// True when two non-adjacent edges touch or any adjacent pair overlaps.
    pub fn is_self_intersecting(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Adjacent edges share a vertex; they only conflict when
                    // collinear and folding back over each other.
                    let shared = if j == i + 1 { b } else { a };
                    let other_i = if shared == b { a } else { b };
                    let other_j = if shared == c { d } else { c };
                    let u = other_i - shared;
                    let v = other_j - shared;
                    if cross(u, v).abs() < 1e-12 && u.dot(v) > 0.0 {
                        return true;
                    }
                } else if segments_intersect(a, b, c, d) {
                    return true;
                }
            }
        }
        false
    }

    /// Even-odd point containment. Points exactly on an edge are inside.
    pub fn contains(&self, p: DVec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if orient(a, b, p).abs() < 1e-12 && on_segment(a, b, p) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Closed convex polygon `quad` lies inside this polygon.
    pub fn contains_convex(&self, quad: &[DVec2]) -> bool {
        if !quad.iter().all(|&p| self.contains(p)) {
            return false;
        }
        let n = quad.len();
        for i in 0..n {
            let (a, b) = (quad[i], quad[(i + 1) % n]);
            if self.edges().any(|(c, d)| segments_cross(a, b, c, d)) {
                return false;
            }
        }
        true
    }

    pub fn bounds(&self) -> (DVec2, DVec2) {
        let mut min = DVec2::splat(f64::INFINITY);
        let mut max = DVec2::splat(f64::NEG_INFINITY);
        for v in &self.vertices {
            min = min.min(*v);
            max = max.max(*v);
        }
        (min, max)
    }
}

/// Separating-axis overlap test for two convex polygons. Shapes that only
/// touch along an edge or a corner do not overlap.
pub fn convex_overlap(a: &[DVec2], b: &[DVec2]) -> bool {
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let edge = poly[(i + 1) % n] - poly[i];
            let axis = DVec2::new(-edge.y, edge.x);
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            if amax <= bmin + 1e-12 || bmax <= amin + 1e-12 {
                return false;
            }
        }
    }
    true
}

fn project(poly: &[DVec2], axis: DVec2) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Closest point to `p` on segment `a..b`.
pub fn closest_on_segment(a: DVec2, b: DVec2, p: DVec2) -> DVec2 {
    let ab = b - a;
    let len2 = ab.length_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}
