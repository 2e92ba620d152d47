use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Pose3D;
use crate::render::SnapshotRef;
use crate::scan::{DetectionCandidate, VerificationRecord, VerificationStatus};

use super::{validate_spec, SlotAddress, TwinError, WarehouseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SlotState {
    Empty,
    /// A detector candidate waiting for laser verification.
    Unverified {
        confidence: f64,
    },
    Verified {
        barcode_id: String,
        box_type: Option<String>,
        snapshot_ref: SnapshotRef,
    },
}

impl SlotState {
    pub fn is_verified(&self) -> bool {
        matches!(self, SlotState::Verified { .. })
    }
}

/// Virtual mirror of the warehouse. Slots fill only through
/// [`DigitalTwin::apply_verification`].
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalTwin {
    spec: WarehouseSpec,
    slots: BTreeMap<SlotAddress, SlotState>,
    revision: u64,
}

impl DigitalTwin {
    pub fn spec(&self) -> &WarehouseSpec {
        &self.spec
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn slots(&self) -> &BTreeMap<SlotAddress, SlotState> {
        &self.slots
    }

    pub fn slot(&self, addr: &SlotAddress) -> Option<&SlotState> {
        self.slots.get(addr)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn verified_count(&self) -> usize {
        self.slots.values().filter(|s| s.is_verified()).count()
    }

    pub fn slot_pose(&self, addr: &SlotAddress) -> Result<Pose3D, TwinError> {
        self.spec.slot_pose(addr).ok_or(TwinError::UnknownAddress(*addr))
    }

    /// Records a detector candidate on an empty slot. Returns whether the
    /// twin changed.
    pub fn mark_candidate(&mut self, candidate: &DetectionCandidate) -> Result<bool, TwinError> {
        let slot = self
            .slots
            .get_mut(&candidate.address)
            .ok_or(TwinError::UnknownAddress(candidate.address))?;
        if *slot != SlotState::Empty {
            return Ok(false);
        }
        *slot = SlotState::Unverified {
            confidence: candidate.confidence,
        };
        self.revision += 1;
        Ok(true)
    }

    /// Fills a slot from a laser-verified record. Anything but a verified
    /// record is rejected and leaves the twin untouched.
    pub fn apply_verification(&mut self, record: &VerificationRecord) -> Result<(), TwinError> {
        let VerificationStatus::Verified { barcode_id } = &record.status else {
            return Err(TwinError::RejectedUnverified(record.address));
        };
        let Some(snapshot_ref) = record.snapshot_ref.clone() else {
            return Err(TwinError::RejectedUnverified(record.address));
        };
        let slot = self
            .slots
            .get_mut(&record.address)
            .ok_or(TwinError::UnknownAddress(record.address))?;
        *slot = SlotState::Verified {
            barcode_id: barcode_id.clone(),
            box_type: record.classified_type.clone(),
            snapshot_ref,
        };
        self.revision += 1;
        Ok(())
    }

    /// Value-returning form of [`DigitalTwin::apply_verification`].
    pub fn with_verification(&self, record: &VerificationRecord) -> Result<DigitalTwin, TwinError> {
        let mut next = self.clone();
        next.apply_verification(record)?;
        Ok(next)
    }
}

/// Builds an all-empty twin with one slot per `(rack, side, section, tier)`.
pub fn generate_twin(spec: &WarehouseSpec) -> Result<DigitalTwin, TwinError> {
    let report = validate_spec(spec);
    if !report.is_empty() {
        return Err(TwinError::InvalidSpec(report));
    }
    let slots = spec.addresses().map(|a| (a, SlotState::Empty)).collect();
    Ok(DigitalTwin {
        spec: spec.clone(),
        slots,
        revision: 0,
    })
}
