use serde::{Deserialize, Serialize};

use crate::geometry::Pose3D;
use crate::warehouse::{DigitalTwin, SlotAddress};

use super::{DetectionCandidate, PreliminaryMap, ScanError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub address: SlotAddress,
    /// Where the UAV hovers: in front of the slot, looking at it.
    pub pose: Pose3D,
    pub candidate: DetectionCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointOutcome {
    Verified,
    Removed,
}

/// Ordered standoff waypoints with a forward-only cursor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanPath {
    waypoints: Vec<Waypoint>,
    cursor: usize,
    outcomes: Vec<WaypointOutcome>,
}

impl ScanPath {
    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn current(&self) -> Option<&Waypoint> {
        self.waypoints.get(self.cursor)
    }

    pub fn remaining(&self) -> &[Waypoint] {
        &self.waypoints[self.cursor..]
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.waypoints.len()
    }

    /// Outcome of every waypoint behind the cursor.
    pub fn outcomes(&self) -> &[WaypointOutcome] {
        &self.outcomes
    }

    /// Closes the current waypoint and moves on. A removed waypoint is never
    /// visited again.
    pub fn complete_current(&mut self, outcome: WaypointOutcome) -> Option<&Waypoint> {
        if self.is_finished() {
            return None;
        }
        self.outcomes.push(outcome);
        self.cursor += 1;
        self.waypoints.get(self.cursor - 1)
    }

    /// Appends waypoints behind the existing ones; the cursor is untouched.
    pub fn extend(&mut self, more: ScanPath) {
        self.waypoints.extend(more.waypoints);
    }
}

/// Serpentine ordering key: tiers ascending, sections ascending on even
/// tiers and descending on odd ones; faces in rack order.
pub fn boustrophedon_key(addr: &SlotAddress) -> (u32, crate::warehouse::Side, u32, i64) {
    let section = i64::from(addr.section);
    let sweep = if addr.tier.is_multiple_of(2) { section } else { -section };
    (addr.rack, addr.side, addr.tier, sweep)
}

fn standoff_pose(twin: &DigitalTwin, addr: &SlotAddress, standoff: f64) -> Result<Pose3D, ScanError> {
    let slot = twin.slot_pose(addr).map_err(|_| ScanError::UnknownAddress(*addr))?;
    let normal = slot.heading();
    let position = slot.position + (normal * standoff).extend(0.0);
    Ok(Pose3D::new(
        position,
        crate::geometry::wrap_angle(slot.yaw + std::f64::consts::PI),
    ))
}

fn build(mut candidates: Vec<DetectionCandidate>, twin: &DigitalTwin, standoff: f64) -> Result<ScanPath, ScanError> {
    if !(standoff > 0.0 && standoff.is_finite()) {
        return Err(ScanError::InvalidStandoff(standoff));
    }
    if candidates.is_empty() {
        return Err(ScanError::EmptyMap);
    }
    candidates.sort_by_key(|c| boustrophedon_key(&c.address));
    let waypoints = candidates
        .into_iter()
        .map(|c| {
            Ok(Waypoint {
                address: c.address,
                pose: standoff_pose(twin, &c.address, standoff)?,
                candidate: c,
            })
        })
        .collect::<Result<Vec<_>, ScanError>>()?;
    Ok(ScanPath {
        waypoints,
        cursor: 0,
        outcomes: Vec::new(),
    })
}

/// One waypoint per candidate at `standoff` meters in front of its slot, in
/// boustrophedon order.
pub fn plan_scan_path(map: &PreliminaryMap, twin: &DigitalTwin, standoff: f64) -> Result<ScanPath, ScanError> {
    build(map.candidates().cloned().collect(), twin, standoff)
}

/// Same ordering for laser probes at explicit slots.
pub fn plan_probe_path(slots: &[SlotAddress], twin: &DigitalTwin, standoff: f64) -> Result<ScanPath, ScanError> {
    build(
        slots.iter().copied().map(DetectionCandidate::probe).collect(),
        twin,
        standoff,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DVec2;
    use crate::warehouse::testing::small_spec;
    use crate::warehouse::{generate_twin, RackFace, Side};

    fn full_face_map(spec: &crate::warehouse::WarehouseSpec, face: RackFace) -> PreliminaryMap {
        let mut map = PreliminaryMap::default();
        map.faces.insert(
            face,
            spec.face_addresses(face)
                .into_iter()
                .map(DetectionCandidate::probe)
                .collect(),
        );
        map
    }

    #[test]
    fn single_candidate() {
        let spec = small_spec(1, 2, 3);
        let twin = generate_twin(&spec).unwrap();
        let addr = SlotAddress::new(0, Side::Back, 1, 1);
        let path = plan_probe_path(&[addr], &twin, 1.2).unwrap();
        assert_eq!(path.len(), 1);
        let slot = twin.slot_pose(&addr).unwrap();
        assert!(((path.waypoints()[0].pose.position - slot.position).length() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn empty_map_and_bad_standoff() {
        let twin = generate_twin(&small_spec(1, 2, 3)).unwrap();
        assert_eq!(
            plan_scan_path(&PreliminaryMap::default(), &twin, 1.2),
            Err(ScanError::EmptyMap)
        );
        let addr = SlotAddress::new(0, Side::Front, 0, 0);
        assert!(matches!(
            plan_probe_path(&[addr], &twin, 0.0),
            Err(ScanError::InvalidStandoff(_))
        ));
    }

    #[test]
    fn two_tiers_three_sections_serpentine() {
        let spec = small_spec(1, 2, 3);
        let twin = generate_twin(&spec).unwrap();
        let face = RackFace {
            rack: 0,
            side: Side::Front,
        };
        let path = plan_scan_path(&full_face_map(&spec, face), &twin, 1.2).unwrap();
        let order: Vec<_> = path
            .waypoints()
            .iter()
            .map(|w| (w.address.tier, w.address.section))
            .collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0)]);
    }

    fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn serpentine_is_shortest_tier_major_order() {
        // Brute force over every tier-major ordering of a 2x3 face, starting
        // from section 0 of the bottom tier.
        let spec = small_spec(1, 2, 3);
        let twin = generate_twin(&spec).unwrap();
        let pos = |s: u32, t: u32| {
            twin.slot_pose(&SlotAddress::new(0, Side::Front, s, t))
                .unwrap()
                .position
        };
        let start = pos(0, 0);
        let sections = [0u32, 1, 2];
        let mut best: Option<(f64, Vec<(u32, u32)>)> = None;
        let mut ties = 0;
        for p0 in permutations(&sections) {
            for p1 in permutations(&sections) {
                let seq: Vec<(u32, u32)> = p0.iter().map(|s| (0, *s)).chain(p1.iter().map(|s| (1, *s))).collect();
                let mut at = start;
                let mut cost = 0.0;
                for (t, s) in &seq {
                    let next = pos(*s, *t);
                    cost += (next - at).length();
                    at = next;
                }
                match &best {
                    Some((c, _)) if (cost - c).abs() < 1e-9 => ties += 1,
                    Some((c, _)) if cost > *c => {}
                    _ => {
                        best = Some((cost, seq));
                        ties = 0;
                    }
                }
            }
        }
        let (_, oracle) = best.unwrap();
        assert_eq!(ties, 0, "minimal tier-major order is unique");
        let face = RackFace {
            rack: 0,
            side: Side::Front,
        };
        let path = plan_scan_path(&full_face_map(&spec, face), &twin, 1.2).unwrap();
        let got: Vec<_> = path
            .waypoints()
            .iter()
            .map(|w| (w.address.tier, w.address.section))
            .collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn standoff_along_normal() {
        let spec = small_spec(2, 3, 4);
        let twin = generate_twin(&spec).unwrap();
        let mut map = PreliminaryMap::default();
        for face in spec.reachable_faces() {
            map.merge(full_face_map(&spec, face));
        }
        let path = plan_scan_path(&map, &twin, 1.2).unwrap();
        for w in path.waypoints() {
            let face = spec.face_geometry(w.address.face()).unwrap();
            let d = face.distance(DVec2::new(w.pose.position.x, w.pose.position.y));
            assert!((d - 1.2).abs() < 1e-12);
            // Looking back at the face.
            assert!(w.pose.heading().dot(face.normal) < -0.999);
        }
    }

    #[test]
    fn cursor_only_moves_forward() {
        let spec = small_spec(1, 2, 2);
        let twin = generate_twin(&spec).unwrap();
        let slots = spec.face_addresses(RackFace {
            rack: 0,
            side: Side::Front,
        });
        let mut path = plan_probe_path(&slots, &twin, 1.2).unwrap();
        let first = path.current().unwrap().address;
        path.complete_current(WaypointOutcome::Removed);
        assert!(path.remaining().iter().all(|w| w.address != first));
        while !path.is_finished() {
            path.complete_current(WaypointOutcome::Verified);
        }
        assert!(path.complete_current(WaypointOutcome::Verified).is_none());
        assert_eq!(path.cursor(), path.len());
    }
}
