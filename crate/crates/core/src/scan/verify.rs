use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::render::{slot_photo, SnapshotRef};
use crate::warehouse::{BoxDims, BoxType, GroundTruth, SlotAddress};

use super::{DetectionCandidate, SensorNoiseModel};

/// Largest per-axis distance at which a measurement still matches a catalog
/// entry: 1.5x the dimensioning accuracy.
pub const CLASSIFY_THRESHOLD: f64 = 0.045;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerificationStatus {
    Verified { barcode_id: String },
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub address: SlotAddress,
    #[serde(flatten)]
    pub status: VerificationStatus,
    pub attempts: u32,
    pub measured_dims: Option<BoxDims>,
    /// Catalog name, or `None` when unclassified.
    pub classified_type: Option<String>,
    pub snapshot_ref: Option<SnapshotRef>,
}

impl VerificationRecord {
    pub fn is_verified(&self) -> bool {
        matches!(self.status, VerificationStatus::Verified { .. })
    }

    pub fn barcode_id(&self) -> Option<&str> {
        match &self.status {
            VerificationStatus::Verified { barcode_id } => Some(barcode_id),
            VerificationStatus::Failed => None,
        }
    }
}

/// Points the laser scanner at a candidate. Real barcodes read with
/// probability `p_laser_read` per attempt; false positives never read.
pub fn verify_waypoint<R: Rng + ?Sized>(
    truth: &GroundTruth,
    candidate: &DetectionCandidate,
    catalog: &[BoxType],
    noise: &SensorNoiseModel,
    rng: &mut R,
) -> VerificationRecord {
    let max_attempts = noise.max_read_attempts.max(1);
    let failed = VerificationRecord {
        address: candidate.address,
        status: VerificationStatus::Failed,
        attempts: max_attempts,
        measured_dims: None,
        classified_type: None,
        snapshot_ref: None,
    };
    let occupant = match truth.occupant(&candidate.address) {
        Some(o) if !candidate.is_spurious() => o,
        _ => return failed,
    };
    for attempt in 1..=max_attempts {
        let roll: f64 = rng.random();
        if roll < noise.p_laser_read {
            let measured = measure_box(occupant.box_type.dims, noise, rng);
            let photo = slot_photo(&candidate.address, &occupant.barcode_id, &measured);
            return VerificationRecord {
                address: candidate.address,
                status: VerificationStatus::Verified {
                    barcode_id: occupant.barcode_id.clone(),
                },
                attempts: attempt,
                measured_dims: Some(measured),
                classified_type: classify_box(&measured, catalog).map(str::to_owned),
                snapshot_ref: Some(SnapshotRef::from_bytes(&photo.to_ppm())),
            };
        }
    }
    failed
}

/// True dimensions plus independent uniform noise in `[-b, b]` per axis.
pub fn measure_box<R: Rng + ?Sized>(truth: BoxDims, noise: &SensorNoiseModel, rng: &mut R) -> BoxDims {
    let b = noise.dim_noise_bound;
    if b <= 0.0 {
        return truth;
    }
    let mut jitter = || rng.random_range(-b..=b);
    BoxDims::new(truth.w + jitter(), truth.h + jitter(), truth.d + jitter())
}

/// Nearest catalog entry by max-axis distance, if within
/// [`CLASSIFY_THRESHOLD`]. Ties go to the earlier entry.
pub fn classify_box<'a>(measured: &BoxDims, catalog: &'a [BoxType]) -> Option<&'a str> {
    let mut best: Option<(&BoxType, f64)> = None;
    for entry in catalog {
        let d = measured.max_axis_distance(&entry.dims);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((entry, d));
        }
    }
    best.filter(|(_, d)| *d <= CLASSIFY_THRESHOLD)
        .map(|(e, _)| e.name.as_str())
}
