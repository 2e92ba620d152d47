//! Barcode candidate detection, scan-path planning, laser verification and
//! box dimensioning.

mod detect;
mod path;
mod verify;

pub use detect::{detect_candidates, DetectionCandidate, PreliminaryMap};
pub use path::{boustrophedon_key, plan_probe_path, plan_scan_path, ScanPath, Waypoint, WaypointOutcome};
pub use verify::{
    classify_box, measure_box, verify_waypoint, VerificationRecord, VerificationStatus, CLASSIFY_THRESHOLD,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, SimRng, Stream};
use crate::warehouse::{BoxType, GroundTruth, RackFace, SlotAddress, WarehouseSpec};

/// Default UAV-to-face distance while scanning, meters.
pub const DEFAULT_STANDOFF: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("preliminary map is empty")]
    EmptyMap,
    #[error("standoff must be positive, got {0}")]
    InvalidStandoff(f64),
    #[error("unknown slot address {0}")]
    UnknownAddress(SlotAddress),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoiseModel {
    pub p_detect: f64,
    pub p_false_positive: f64,
    pub p_laser_read: f64,
    pub max_read_attempts: u32,
    /// Half-width of the uniform dimensioning error, meters.
    pub dim_noise_bound: f64,
}

impl Default for SensorNoiseModel {
    fn default() -> Self {
        Self {
            p_detect: 0.95,
            p_false_positive: 0.02,
            p_laser_read: 0.98,
            max_read_attempts: 2,
            dim_noise_bound: 0.03,
        }
    }
}

impl SensorNoiseModel {
    /// Perfect detector and scanner; measurement noise is kept.
    pub fn noiseless() -> Self {
        Self {
            p_detect: 1.0,
            p_false_positive: 0.0,
            p_laser_read: 1.0,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_detect", self.p_detect),
            ("p_false_positive", self.p_false_positive),
            ("p_laser_read", self.p_laser_read),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        if self.max_read_attempts < 1 {
            return Err("max_read_attempts must be at least 1".into());
        }
        if !(self.dim_noise_bound >= 0.0 && self.dim_noise_bound.is_finite()) {
            return Err(format!("dim_noise_bound = {} must be >= 0", self.dim_noise_bound));
        }
        Ok(())
    }
}

/// The only component allowed to look at [`GroundTruth`]. Owns one random
/// stream per sensor so a mission's outputs depend only on its seed.
#[derive(Debug, Clone)]
pub struct Sensors {
    truth: GroundTruth,
    noise: SensorNoiseModel,
    catalog: Vec<BoxType>,
    detect_rng: SimRng,
    laser_rng: SimRng,
}

impl Sensors {
    pub fn new(truth: GroundTruth, spec: &WarehouseSpec, seed: u64) -> Self {
        Self {
            truth,
            noise: spec.sensor_noise,
            catalog: spec.box_catalog.clone(),
            detect_rng: stream(seed, Stream::Detection),
            laser_rng: stream(seed, Stream::Laser),
        }
    }

    pub fn noise(&self) -> &SensorNoiseModel {
        &self.noise
    }

    pub fn detect(&mut self, spec: &WarehouseSpec, face: RackFace) -> PreliminaryMap {
        detect_candidates(&self.truth, spec, face, &self.noise, &mut self.detect_rng)
    }

    pub fn verify(&mut self, candidate: &DetectionCandidate) -> VerificationRecord {
        verify_waypoint(&self.truth, candidate, &self.catalog, &self.noise, &mut self.laser_rng)
    }

    /// Read access for the renderer and test harnesses; mission logic never
    /// calls this.
    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Simulates someone moving stock between missions.
    pub fn truth_mut(&mut self) -> &mut GroundTruth {
        &mut self.truth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(SensorNoiseModel::default().check().is_ok());
        assert!(SensorNoiseModel::noiseless().check().is_ok());
        let bad = SensorNoiseModel {
            p_laser_read: 1.5,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        let bad = SensorNoiseModel {
            max_read_attempts: 0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
    }

    #[test]
    fn partial_noise_section_fills_defaults() {
        let n: SensorNoiseModel = serde_json::from_str(r#"{"p_detect": 1.0}"#).unwrap();
        assert_eq!(n.p_detect, 1.0);
        assert_eq!(n.max_read_attempts, 2);
        assert_eq!(n.dim_noise_bound, 0.03);
    }
}
