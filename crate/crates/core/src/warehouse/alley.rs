use serde::{Deserialize, Serialize};

use crate::geometry::{closest_on_segment, DVec2, Polygon};

use super::{RackFace, SlotAddress, WarehouseSpec};

/// An aisle and the one or two rack faces bordering it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alley {
    pub id: u32,
    pub faces: Vec<RackFace>,
    /// Centerline the ground robot drives along.
    pub start: DVec2,
    pub end: DVec2,
}

impl Alley {
    pub fn borders(&self, face: RackFace) -> bool {
        self.faces.contains(&face)
    }

    /// Point on the centerline closest to `p`.
    pub fn station_for(&self, p: DVec2) -> DVec2 {
        closest_on_segment(self.start, self.end, p)
    }

    pub fn slots(&self, spec: &WarehouseSpec) -> Vec<SlotAddress> {
        self.faces.iter().flat_map(|f| spec.face_addresses(*f)).collect()
    }
}

/// Pairs facing rack faces into alleys. Faces without a partner form a
/// single-sided alley whose centerline sits half an aisle in front of them.
pub fn alleys(spec: &WarehouseSpec) -> Vec<Alley> {
    let faces = spec.reachable_faces();
    let walls = Polygon::from_polyline(&spec.wall_polyline);
    let mut taken = vec![false; faces.len()];
    let mut out = Vec::new();

    for i in 0..faces.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let f = spec.face_geometry(faces[i]).expect("reachable face exists");
        let mut partner = None;
        for j in (i + 1)..faces.len() {
            if taken[j] {
                continue;
            }
            let g = spec.face_geometry(faces[j]).expect("reachable face exists");
            if f.normal.dot(g.normal) > -0.999 {
                continue;
            }
            let gap = f.distance(g.origin);
            if gap <= 0.0 || gap > 2.0 * spec.aisle_width {
                continue;
            }
            let g0 = f.along(g.origin);
            let g1 = f.along(g.origin + g.tangent * g.length);
            let (lo, hi) = (g0.min(g1), g0.max(g1));
            if hi <= 0.0 || lo >= f.length {
                continue;
            }
            partner = Some((j, gap, lo, hi));
            break;
        }

        let (offset, lo, hi) = match partner {
            Some((j, gap, lo, hi)) => {
                taken[j] = true;
                (gap / 2.0, lo.min(0.0), hi.max(f.length))
            }
            None => (spec.aisle_width / 2.0, 0.0, f.length),
        };
        let base = f.origin + f.normal * offset;
        let cap = spec.aisle_width / 2.0;
        let point = |along: f64| base + f.tangent * along;
        // Extend past the rack ends so the robot can turn into the next
        // aisle, but never through a wall.
        let mut start_ext = cap;
        while start_ext > 0.0 && !walls.contains(point(lo - start_ext)) {
            start_ext -= 0.05;
        }
        let mut end_ext = cap;
        while end_ext > 0.0 && !walls.contains(point(hi + end_ext)) {
            end_ext -= 0.05;
        }
        let mut alley_faces = vec![faces[i]];
        if let Some((j, ..)) = partner {
            alley_faces.push(faces[j]);
        }
        out.push(Alley {
            id: out.len() as u32,
            faces: alley_faces,
            start: point(lo - start_ext.max(0.0)),
            end: point(hi + end_ext.max(0.0)),
        });
    }
    out
}

pub fn alley_of(alleys: &[Alley], face: RackFace) -> Option<&Alley> {
    alleys.iter().find(|a| a.borders(face))
}
