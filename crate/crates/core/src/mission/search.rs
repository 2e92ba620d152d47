use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::DVec2;
use crate::warehouse::{alleys, Alley, DigitalTwin, SlotAddress, WarehouseSpec};

/// Tag search inside one alley, expanding in Chebyshev rings around the
/// tag's last known slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSearchState {
    pub tag: String,
    pub origin: SlotAddress,
    /// Last ring handed out; `None` before the first expansion.
    pub ring: Option<u32>,
    pub visited: BTreeSet<SlotAddress>,
    pub alley: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOption {
    SelectAnotherAlley,
    SwitchToVisualInspection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SearchResult {
    Found { address: SlotAddress, ring: u32 },
    Exhausted { alley: u32, options: Vec<SearchOption> },
}

impl TagSearchState {
    pub fn new(tag: impl Into<String>, origin: SlotAddress, alley: u32) -> Self {
        Self {
            tag: tag.into(),
            origin,
            ring: None,
            visited: BTreeSet::new(),
            alley,
        }
    }
}

/// Search distance from `origin` to `addr` on the `(section, tier)` grid
/// spanning both faces of the alley. Slots on the facing rack sit one step
/// away at least; their grid position is the one directly across from the
/// origin slot.
pub fn search_distance(spec: &WarehouseSpec, origin: &SlotAddress, addr: &SlotAddress) -> Option<u32> {
    let d = |a: i64, b: i64| (a - b).unsigned_abs() as u32;
    if addr.face() == origin.face() {
        return Some(d(addr.section.into(), origin.section.into()).max(d(addr.tier.into(), origin.tier.into())));
    }
    let center = spec.slot_pose(origin)?.position;
    let g = spec.face_geometry(addr.face())?;
    let s = (g.along(DVec2::new(center.x, center.y)) / g.cell_width).floor() as i64;
    let t = (center.z / g.cell_height).floor() as i64;
    Some(d(addr.section.into(), s).max(d(addr.tier.into(), t)).max(1))
}

fn alley_for(all: &[Alley], id: u32) -> Option<&Alley> {
    all.iter().find(|a| a.id == id)
}

/// Hands out the next non-empty ring of unvisited slots and marks them
/// visited. An empty result means the alley is exhausted.
pub fn expand_search_area(s: &mut TagSearchState, twin: &DigitalTwin) -> Vec<SlotAddress> {
    let spec = twin.spec();
    let all = alleys(spec);
    let Some(alley) = alley_for(&all, s.alley) else {
        return Vec::new();
    };
    let slots: Vec<(SlotAddress, u32)> = alley
        .slots(spec)
        .into_iter()
        .filter_map(|a| search_distance(spec, &s.origin, &a).map(|d| (a, d)))
        .collect();
    let max = slots.iter().map(|(_, d)| *d).max().unwrap_or(0);
    let mut r = s.ring.map_or(0, |r| r + 1);
    while r <= max {
        let ring: Vec<SlotAddress> = slots
            .iter()
            .filter(|(a, d)| *d == r && !s.visited.contains(a))
            .map(|(a, _)| *a)
            .collect();
        s.ring = Some(r);
        if !ring.is_empty() {
            s.visited.extend(ring.iter().copied());
            return ring;
        }
        r += 1;
    }
    Vec::new()
}

pub fn resolve_search(s: &TagSearchState, found: Option<SlotAddress>) -> SearchResult {
    match found {
        Some(address) => SearchResult::Found {
            address,
            ring: s.ring.unwrap_or(0),
        },
        None => SearchResult::Exhausted {
            alley: s.alley,
            options: vec![SearchOption::SelectAnotherAlley, SearchOption::SwitchToVisualInspection],
        },
    }
}

/// Runs a whole search with an instantaneous probe. Mission control does
/// the same ring by ring with real flights.
pub fn run_search(
    s: &mut TagSearchState,
    twin: &DigitalTwin,
    mut probe: impl FnMut(&SlotAddress) -> bool,
) -> SearchResult {
    loop {
        let ring = expand_search_area(s, twin);
        if ring.is_empty() {
            return resolve_search(s, None);
        }
        if let Some(hit) = ring.iter().find(|a| probe(a)) {
            return resolve_search(s, Some(*hit));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warehouse::testing::small_spec;
    use crate::warehouse::{generate_twin, RackFace, Side};

    fn setup() -> (DigitalTwin, u32) {
        let twin = generate_twin(&small_spec(2, 4, 6)).unwrap();
        let all = alleys(twin.spec());
        let shared = all.iter().find(|a| a.faces.len() == 2).unwrap().id;
        (twin, shared)
    }

    #[test]
    fn ring_zero_is_origin() {
        let (twin, alley) = setup();
        let origin = SlotAddress::new(0, Side::Back, 2, 1);
        let mut s = TagSearchState::new("T", origin, alley);
        assert_eq!(expand_search_area(&mut s, &twin), vec![origin]);
        assert_eq!(s.ring, Some(0));
    }

    #[test]
    fn interior_ring_one_is_8_plus_9() {
        let (twin, alley) = setup();
        let origin = SlotAddress::new(0, Side::Back, 2, 1);
        let mut s = TagSearchState::new("T", origin, alley);
        expand_search_area(&mut s, &twin);
        let ring = expand_search_area(&mut s, &twin);
        let own = ring.iter().filter(|a| a.face() == origin.face()).count();
        let other = ring.len() - own;
        // Brute-force oracle on the slot grid.
        let face1 = RackFace {
            rack: 1,
            side: Side::Front,
        };
        let own_oracle = (0..6u32)
            .flat_map(|sec| (0..4u32).map(move |t| (sec, t)))
            .filter(|(sec, t)| (*sec as i64 - 2).abs().max((*t as i64 - 1).abs()) == 1)
            .count();
        let other_oracle = twin
            .spec()
            .face_addresses(face1)
            .iter()
            .filter(|a| (a.section as i64 - 2).abs() <= 1 && (a.tier as i64 - 1).abs() <= 1)
            .count();
        assert_eq!((own, other), (own_oracle, other_oracle));
        assert_eq!((own, other), (8, 9));
    }

    #[test]
    fn corner_ring_one() {
        let (twin, alley) = setup();
        let origin = SlotAddress::new(0, Side::Back, 0, 0);
        let mut s = TagSearchState::new("T", origin, alley);
        expand_search_area(&mut s, &twin);
        let ring = expand_search_area(&mut s, &twin);
        assert_eq!(ring.iter().filter(|a| a.face() == origin.face()).count(), 3);
    }

    #[test]
    fn exhaustion_offers_both_options() {
        let (twin, alley) = setup();
        let mut s = TagSearchState::new("T", SlotAddress::new(1, Side::Front, 5, 3), alley);
        let res = run_search(&mut s, &twin, |_| false);
        assert_eq!(
            res,
            SearchResult::Exhausted {
                alley,
                options: vec![SearchOption::SelectAnotherAlley, SearchOption::SwitchToVisualInspection]
            }
        );
        assert_eq!(s.visited.len(), 48);
        // Further expansion stays empty and the ring never goes back.
        let before = s.ring;
        assert!(expand_search_area(&mut s, &twin).is_empty());
        assert!(s.ring >= before);
    }
}
