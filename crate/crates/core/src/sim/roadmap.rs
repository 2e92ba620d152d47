use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};

use crate::geometry::{rotate, segment_hits_open_box, segments_cross, DVec2, Polygon};
use crate::warehouse::{alleys, Alley, WarehouseSpec};

/// Clearance kept between the ground robot's path and rack footprints.
pub const UGV_CLEARANCE: f64 = 0.4;

/// Visibility graph over alley centerline endpoints. The ground robot only
/// ever drives along its edges, so it cannot hit a rack.
#[derive(Debug, Clone)]
pub struct Roadmap {
    graph: UnGraph<DVec2, f64>,
    walls: Polygon,
    /// Rack boxes in rack-local frames: (origin, orientation, max corner).
    obstacles: Vec<(DVec2, f64, DVec2)>,
    alleys: Vec<Alley>,
}

impl Roadmap {
    pub fn build(spec: &WarehouseSpec) -> Self {
        let alleys = alleys(spec);
        let mut map = Self {
            graph: UnGraph::default(),
            walls: Polygon::from_polyline(&spec.wall_polyline),
            obstacles: spec
                .racks
                .iter()
                .map(|r| (r.origin, r.orientation, DVec2::new(r.length(), r.depth())))
                .collect(),
            alleys: alleys.clone(),
        };
        for a in &alleys {
            map.graph.add_node(a.start);
            map.graph.add_node(a.end);
        }
        let nodes: Vec<NodeIndex> = map.graph.node_indices().collect();
        for (n, &a) in nodes.iter().enumerate() {
            for &b in &nodes[n + 1..] {
                let (pa, pb) = (map.graph[a], map.graph[b]);
                if map.visible(pa, pb) {
                    map.graph.add_edge(a, b, (pb - pa).length());
                }
            }
        }
        map
    }

    pub fn alleys(&self) -> &[Alley] {
        &self.alleys
    }

    /// Home position of the ground robot: start of the first alley.
    pub fn home(&self) -> DVec2 {
        self.alleys.first().map_or(DVec2::ZERO, |a| a.start)
    }

    /// Straight drive from `a` to `b` stays inside the walls and clear of
    /// every rack by [`UGV_CLEARANCE`].
    pub fn visible(&self, a: DVec2, b: DVec2) -> bool {
        if !self.walls.contains(a) || !self.walls.contains(b) || !self.walls.contains((a + b) * 0.5) {
            return false;
        }
        if self.walls.edges().any(|(p, q)| segments_cross(a, b, p, q)) {
            return false;
        }
        let m = DVec2::splat(UGV_CLEARANCE);
        self.obstacles.iter().all(|(origin, angle, size)| {
            let la = rotate(a - *origin, -angle);
            let lb = rotate(b - *origin, -angle);
            !segment_hits_open_box(la, lb, -m, *size + m)
        })
    }

    /// Shortest polyline from `from` to `to` (both included), or `None`
    /// when `to` cannot be reached.
    pub fn route(&self, from: DVec2, to: DVec2) -> Option<Vec<DVec2>> {
        if (to - from).length() < 1e-9 {
            return Some(vec![from]);
        }
        if self.visible(from, to) {
            return Some(vec![from, to]);
        }
        let mut g = self.graph.clone();
        let s = g.add_node(from);
        let t = g.add_node(to);
        for n in self.graph.node_indices() {
            let p = g[n];
            if self.visible(from, p) {
                g.add_edge(s, n, (p - from).length());
            }
            if self.visible(p, to) {
                g.add_edge(n, t, (to - p).length());
            }
        }
        let (_, nodes) = astar(&g, s, |n| n == t, |e| *e.weight(), |n| (g[n] - to).length())?;
        Some(nodes.into_iter().map(|n| g[n]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warehouse::testing::small_spec;

    #[test]
    fn routes_between_alleys_avoid_racks() {
        let spec = small_spec(2, 4, 6);
        let rm = Roadmap::build(&spec);
        let a = rm.alleys()[0].station_for(DVec2::new(5.0, 0.0));
        let b = rm.alleys()[2].station_for(DVec2::new(5.0, 20.0));
        let path = rm.route(a, b).unwrap();
        assert!(path.len() >= 3);
        for w in path.windows(2) {
            assert!(rm.visible(w[0], w[1]));
        }
        assert_eq!(*path.last().unwrap(), b);
        // Same alley: straight line.
        let c = rm.alleys()[0].station_for(DVec2::new(8.0, 0.0));
        assert_eq!(rm.route(a, c).unwrap(), vec![a, c]);
    }
}
