//! Warehouse description, validation and the verification-gated digital twin.

mod alley;
mod spec;
mod truth;
mod twin;
mod validate;

pub use alley::{alley_of, alleys, Alley};
pub use spec::{BoxDims, BoxType, FaceGeometry, RackFace, RackSpec, Side, SlotAddress, StockParams, WarehouseSpec};
pub use truth::{GroundTruth, Occupant};
pub use twin::{generate_twin, DigitalTwin, SlotState};
pub use validate::{validate_spec, ValidationReport, Violation, ViolationCode, CATALOG_SEPARATION};

use thiserror::Error;

use crate::geometry::DVec2;

#[derive(Debug, Error, PartialEq)]
pub enum WarehouseError {
    #[error("cannot parse warehouse spec: {0}")]
    Parse(String),
    #[error("cannot read warehouse spec: {0}")]
    Io(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum TwinError {
    #[error("invalid warehouse spec:\n{0}")]
    InvalidSpec(ValidationReport),
    #[error("unknown slot address {0}")]
    UnknownAddress(SlotAddress),
    #[error("slot {0}: only laser-verified records may fill the twin")]
    RejectedUnverified(SlotAddress),
}

/// Parallel rows of identical racks with an aisle in front of every face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformLayout {
    pub racks: u32,
    pub tiers: u32,
    pub sections: u32,
    pub cell_width: f64,
    pub cell_height: f64,
    pub cell_depth: f64,
    pub aisle_width: f64,
    /// Free height above the racks.
    pub headroom: f64,
}

impl UniformLayout {
    pub fn new(racks: u32, tiers: u32, sections: u32) -> Self {
        Self {
            racks,
            tiers,
            sections,
            cell_width: 1.0,
            cell_height: 1.0,
            cell_depth: 1.0,
            aisle_width: 3.0,
            headroom: 2.0,
        }
    }

    pub fn build(&self, seed: u64) -> WarehouseSpec {
        let depth = 2.0 * self.cell_depth;
        let length = f64::from(self.sections) * self.cell_width;
        let width = length + 2.0 * self.aisle_width;
        let height = self.aisle_width + f64::from(self.racks) * (depth + self.aisle_width);
        let racks = (0..self.racks)
            .map(|i| RackSpec {
                origin: DVec2::new(
                    self.aisle_width,
                    self.aisle_width + f64::from(i) * (depth + self.aisle_width),
                ),
                orientation: 0.0,
                tiers: self.tiers,
                sections: self.sections,
                cell_width: self.cell_width,
                cell_height: self.cell_height,
                cell_depth: self.cell_depth,
                unreachable_sides: Vec::new(),
            })
            .collect();
        WarehouseSpec {
            wall_polyline: vec![
                DVec2::new(0.0, 0.0),
                DVec2::new(width, 0.0),
                DVec2::new(width, height),
                DVec2::new(0.0, height),
                DVec2::new(0.0, 0.0),
            ],
            ceiling_height: f64::from(self.tiers) * self.cell_height + self.headroom,
            racks,
            aisle_width: self.aisle_width,
            box_catalog: default_catalog(),
            seed,
            sensor_noise: Default::default(),
            teleop: Default::default(),
            stock: StockParams::default(),
        }
    }
}

/// Three pallet sizes, pairwise separated well beyond the 0.09 m rule.
pub fn default_catalog() -> Vec<BoxType> {
    vec![
        BoxType {
            name: "euro-low".into(),
            dims: BoxDims::new(0.80, 0.45, 0.60),
        },
        BoxType {
            name: "euro-high".into(),
            dims: BoxDims::new(0.80, 0.90, 0.60),
        },
        BoxType {
            name: "industrial".into(),
            dims: BoxDims::new(0.95, 0.75, 0.80),
        },
    ]
}
