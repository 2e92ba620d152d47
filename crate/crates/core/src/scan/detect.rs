use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::DVec2;
use crate::warehouse::{GroundTruth, RackFace, SlotAddress, WarehouseSpec};

use super::SensorNoiseModel;

/// A possible barcode location reported by the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCandidate {
    pub address: SlotAddress,
    /// Normalized image coordinates in `[0, 1]^2`.
    pub image_position: DVec2,
    pub confidence: f64,
    /// Sensor-side truth. Never serialized and never read by mission logic.
    #[serde(skip)]
    spurious: bool,
}

impl DetectionCandidate {
    /// A probe at a known slot, used when the laser is pointed at a slot
    /// without a detector hit (tag search, manual inspection).
    pub fn probe(address: SlotAddress) -> Self {
        Self {
            address,
            image_position: DVec2::splat(0.5),
            confidence: 1.0,
            spurious: false,
        }
    }

    pub(crate) fn is_spurious(&self) -> bool {
        self.spurious
    }
}

/// Detector output grouped by rack face, in scan order within each face.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreliminaryMap {
    pub faces: BTreeMap<RackFace, Vec<DetectionCandidate>>,
}

impl PreliminaryMap {
    pub fn len(&self) -> usize {
        self.faces.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn candidates(&self) -> impl Iterator<Item = &DetectionCandidate> {
        self.faces.values().flatten()
    }

    pub fn merge(&mut self, other: PreliminaryMap) {
        for (face, cands) in other.faces {
            let entry = self.faces.entry(face).or_default();
            for c in cands {
                if !entry.iter().any(|e| e.address == c.address) {
                    entry.push(c);
                }
            }
        }
    }
}

/// Simulated detector pass over one rack face. Occupied slots show up with
/// probability `p_detect`; every other slot produces a false positive with
/// probability `p_false_positive`.
pub fn detect_candidates<R: Rng + ?Sized>(
    truth: &GroundTruth,
    spec: &WarehouseSpec,
    face: RackFace,
    noise: &SensorNoiseModel,
    rng: &mut R,
) -> PreliminaryMap {
    let mut found = Vec::new();
    for addr in spec.face_addresses(face) {
        // Fixed draw count per slot keeps the stream aligned across outcomes.
        let roll: f64 = rng.random();
        let jx: f64 = rng.random();
        let jy: f64 = rng.random();
        let jc: f64 = rng.random();
        if truth.occupant(&addr).is_some() {
            if roll < noise.p_detect {
                found.push(DetectionCandidate {
                    address: addr,
                    image_position: DVec2::new(0.35 + 0.3 * jx, 0.35 + 0.3 * jy),
                    confidence: 0.6 + 0.4 * jc,
                    spurious: false,
                });
            }
        } else if roll < noise.p_false_positive {
            found.push(DetectionCandidate {
                address: addr,
                image_position: DVec2::new(jx, jy),
                confidence: 0.3 + 0.5 * jc,
                spurious: true,
            });
        }
    }
    let mut map = PreliminaryMap::default();
    map.faces.insert(face, found);
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use crate::warehouse::testing::small_spec;
    use crate::warehouse::Side;

    const FACE: RackFace = RackFace {
        rack: 0,
        side: Side::Front,
    };

    #[test]
    fn noiseless_detects_exactly_occupied() {
        let spec = small_spec(1, 4, 6);
        let truth = GroundTruth::generate(&spec, 5);
        let noise = SensorNoiseModel::noiseless();
        let map = detect_candidates(&truth, &spec, FACE, &noise, &mut stream(1, Stream::Detection));
        let got: Vec<_> = map.candidates().map(|c| c.address).collect();
        let want: Vec<_> = spec
            .face_addresses(FACE)
            .into_iter()
            .filter(|a| truth.occupant(a).is_some())
            .collect();
        assert_eq!(got, want);
        assert!(map.candidates().all(|c| !c.is_spurious()));
    }

    #[test]
    fn false_positives_only_on_unlabeled_slots() {
        let spec = small_spec(1, 4, 6);
        let truth = GroundTruth::generate(&spec, 5);
        let noise = SensorNoiseModel {
            p_false_positive: 0.5,
            ..SensorNoiseModel::default()
        };
        let map = detect_candidates(&truth, &spec, FACE, &noise, &mut stream(2, Stream::Detection));
        assert!(map.candidates().any(|c| c.is_spurious()));
        for c in map.candidates() {
            assert_eq!(c.is_spurious(), truth.occupant(&c.address).is_none());
            assert!((0.0..=1.0).contains(&c.confidence));
            assert!(c.image_position.cmpge(DVec2::ZERO).all());
            assert!(c.image_position.cmple(DVec2::ONE).all());
        }
    }

    #[test]
    fn spurious_flag_not_serialized() {
        let c = DetectionCandidate {
            address: SlotAddress::new(0, Side::Front, 0, 0),
            image_position: DVec2::new(0.1, 0.2),
            confidence: 0.5,
            spurious: true,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(!s.contains("spurious"));
    }
}
