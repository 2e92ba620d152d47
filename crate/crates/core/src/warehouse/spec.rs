use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{rotate, DVec2, DVec3, Pose3D};
use crate::scan::SensorNoiseModel;
use crate::teleop::TeleopConfig;

use super::WarehouseError;

/// Declarative description of a warehouse. This is the document read from
/// disk; everything else (twin, fly-zone map, roadmap) is derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarehouseSpec {
    #[serde(rename = "walls")]
    pub wall_polyline: Vec<DVec2>,
    pub ceiling_height: f64,
    pub racks: Vec<RackSpec>,
    pub aisle_width: f64,
    pub box_catalog: Vec<BoxType>,
    pub seed: u64,
    #[serde(default)]
    pub sensor_noise: SensorNoiseModel,
    #[serde(default)]
    pub teleop: TeleopConfig,
    #[serde(default)]
    pub stock: StockParams,
}

/// How the simulated physical warehouse is populated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StockParams {
    /// Fraction of slots holding a labeled pallet.
    pub occupancy: f64,
    /// Fraction of the remaining slots holding unlabeled clutter.
    pub clutter: f64,
}

impl Default for StockParams {
    fn default() -> Self {
        Self {
            occupancy: 0.6,
            clutter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RackSpec {
    pub origin: DVec2,
    pub orientation: f64,
    pub tiers: u32,
    pub sections: u32,
    pub cell_width: f64,
    pub cell_height: f64,
    pub cell_depth: f64,
    /// Sides that do not border an aisle (for example a rack against a wall).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unreachable_sides: Vec<Side>,
}

impl RackSpec {
    /// Rack depth: one cell per side, back to back.
    pub fn depth(&self) -> f64 {
        2.0 * self.cell_depth
    }

    pub fn length(&self) -> f64 {
        f64::from(self.sections) * self.cell_width
    }

    pub fn height(&self) -> f64 {
        f64::from(self.tiers) * self.cell_height
    }

    pub fn to_world(&self, local: DVec2) -> DVec2 {
        self.origin + rotate(local, self.orientation)
    }

    /// Footprint corners in world coordinates, counter-clockwise.
    pub fn footprint(&self) -> [DVec2; 4] {
        self.inflated_footprint(0.0)
    }

    pub fn inflated_footprint(&self, margin: f64) -> [DVec2; 4] {
        let (l, d) = (self.length(), self.depth());
        [
            DVec2::new(-margin, -margin),
            DVec2::new(l + margin, -margin),
            DVec2::new(l + margin, d + margin),
            DVec2::new(-margin, d + margin),
        ]
        .map(|p| self.to_world(p))
    }

    pub fn is_reachable(&self, side: Side) -> bool {
        !self.unreachable_sides.contains(&side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxType {
    pub name: String,
    pub dims: BoxDims,
}

/// Box extents in meters, written as `[w, h, d]` on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct BoxDims {
    pub w: f64,
    pub h: f64,
    pub d: f64,
}

impl BoxDims {
    pub fn new(w: f64, h: f64, d: f64) -> Self {
        Self { w, h, d }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.w, self.h, self.d]
    }

    /// Largest per-axis difference.
    pub fn max_axis_distance(&self, other: &BoxDims) -> f64 {
        (self.w - other.w)
            .abs()
            .max((self.h - other.h).abs())
            .max((self.d - other.d).abs())
    }
}

impl From<[f64; 3]> for BoxDims {
    fn from([w, h, d]: [f64; 3]) -> Self {
        Self { w, h, d }
    }
}

impl From<BoxDims> for [f64; 3] {
    fn from(b: BoxDims) -> Self {
        b.as_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Back,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Front, Side::Back];

    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Front => "front",
            Side::Back => "back",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = WarehouseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "front" | "f" => Ok(Side::Front),
            "back" | "b" => Ok(Side::Back),
            _ => Err(WarehouseError::Parse(format!("unknown rack side `{s}`"))),
        }
    }
}

/// One pallet place: `(rack, side, section, tier)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotAddress {
    pub rack: u32,
    pub side: Side,
    pub section: u32,
    pub tier: u32,
}

impl SlotAddress {
    pub fn new(rack: u32, side: Side, section: u32, tier: u32) -> Self {
        Self {
            rack,
            side,
            section,
            tier,
        }
    }

    pub fn face(&self) -> RackFace {
        RackFace {
            rack: self.rack,
            side: self.side,
        }
    }
}

impl fmt::Display for SlotAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.rack, self.side, self.section, self.tier)
    }
}

/// Parses `rack:side:section:tier`, e.g. `1:back:4:7`.
impl FromStr for SlotAddress {
    type Err = WarehouseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [rack, side, section, tier] = parts.as_slice() else {
            return Err(WarehouseError::Parse(format!(
                "slot address `{s}` is not rack:side:section:tier"
            )));
        };
        let num = |v: &str| {
            v.parse::<u32>()
                .map_err(|_| WarehouseError::Parse(format!("bad index `{v}` in `{s}`")))
        };
        Ok(SlotAddress::new(num(rack)?, side.parse()?, num(section)?, num(tier)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RackFace {
    pub rack: u32,
    pub side: Side,
}

impl fmt::Display for RackFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.rack, self.side)
    }
}

/// World-frame geometry of one rack face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    /// Bottom corner of section 0 on the face plane.
    pub origin: DVec2,
    /// Unit vector along increasing section index.
    pub tangent: DVec2,
    /// Unit outward normal, pointing into the adjacent aisle.
    pub normal: DVec2,
    pub length: f64,
    pub height: f64,
    pub cell_width: f64,
    pub cell_height: f64,
    pub sections: u32,
    pub tiers: u32,
}

impl FaceGeometry {
    pub fn slot_center(&self, section: u32, tier: u32) -> DVec3 {
        let along = (f64::from(section) + 0.5) * self.cell_width;
        let p = self.origin + self.tangent * along;
        p.extend((f64::from(tier) + 0.5) * self.cell_height)
    }

    /// Signed distance of a horizontal point in front of the face plane.
    pub fn distance(&self, p: DVec2) -> f64 {
        (p - self.origin).dot(self.normal)
    }

    /// Coordinate along the face, zero at section 0's outer edge.
    pub fn along(&self, p: DVec2) -> f64 {
        (p - self.origin).dot(self.tangent)
    }

    /// Heading that looks at the face from the aisle.
    pub fn facing_yaw(&self) -> f64 {
        (-self.normal).to_angle()
    }
}

impl WarehouseSpec {
    pub fn from_json(text: &str) -> Result<Self, WarehouseError> {
        serde_json::from_str(text).map_err(|e| WarehouseError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WarehouseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| WarehouseError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn rack(&self, index: u32) -> Option<&RackSpec> {
        self.racks.get(index as usize)
    }

    pub fn contains_address(&self, addr: &SlotAddress) -> bool {
        self.rack(addr.rack)
            .is_some_and(|r| addr.section < r.sections && addr.tier < r.tiers)
    }

    /// All slot addresses in canonical order.
    pub fn addresses(&self) -> impl Iterator<Item = SlotAddress> + '_ {
        self.racks.iter().enumerate().flat_map(|(ri, rack)| {
            Side::BOTH.into_iter().flat_map(move |side| {
                (0..rack.sections).flat_map(move |section| {
                    (0..rack.tiers).map(move |tier| SlotAddress::new(ri as u32, side, section, tier))
                })
            })
        })
    }

    /// Every face that borders an aisle, in rack order.
    pub fn reachable_faces(&self) -> Vec<RackFace> {
        self.racks
            .iter()
            .enumerate()
            .flat_map(|(ri, rack)| {
                Side::BOTH
                    .into_iter()
                    .filter(|s| rack.is_reachable(*s))
                    .map(move |side| RackFace { rack: ri as u32, side })
            })
            .collect()
    }

    pub fn face_addresses(&self, face: RackFace) -> Vec<SlotAddress> {
        let Some(rack) = self.rack(face.rack) else {
            return Vec::new();
        };
        (0..rack.sections)
            .flat_map(|s| (0..rack.tiers).map(move |t| SlotAddress::new(face.rack, face.side, s, t)))
            .collect()
    }

    pub fn face_geometry(&self, face: RackFace) -> Option<FaceGeometry> {
        let rack = self.rack(face.rack)?;
        let (local_y, local_normal) = match face.side {
            Side::Front => (0.0, DVec2::new(0.0, -1.0)),
            Side::Back => (rack.depth(), DVec2::new(0.0, 1.0)),
        };
        Some(FaceGeometry {
            origin: rack.to_world(DVec2::new(0.0, local_y)),
            tangent: rotate(DVec2::X, rack.orientation),
            normal: rotate(local_normal, rack.orientation),
            length: rack.length(),
            height: rack.height(),
            cell_width: rack.cell_width,
            cell_height: rack.cell_height,
            sections: rack.sections,
            tiers: rack.tiers,
        })
    }

    /// Center of the slot's front face; yaw is the outward normal heading.
    pub fn slot_pose(&self, addr: &SlotAddress) -> Option<Pose3D> {
        if !self.contains_address(addr) {
            return None;
        }
        let face = self.face_geometry(addr.face())?;
        Some(Pose3D::new(
            face.slot_center(addr.section, addr.tier),
            face.normal.to_angle(),
        ))
    }

    pub fn max_rack_height(&self) -> f64 {
        self.racks.iter().map(RackSpec::height).fold(0.0, f64::max)
    }
}
