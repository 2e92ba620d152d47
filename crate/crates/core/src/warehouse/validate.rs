use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{convex_overlap, Polygon};

use super::WarehouseSpec;

/// Minimum per-axis gap between two catalog entries. Three times the
/// dimensioning accuracy, so a noisy measurement never sits closer to the
/// wrong entry.
pub const CATALOG_SEPARATION: f64 = 0.09;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    NonFinite,
    WallsDegenerate,
    WallsSelfIntersecting,
    CeilingTooLow,
    RacksEmpty,
    RackOutsideWalls,
    RackTiersZero,
    RackSectionsZero,
    RackCellNonPositive,
    RackTooTall,
    RacksOverlap,
    AisleWidthNonPositive,
    CatalogEmpty,
    CatalogDuplicateName,
    BoxDimsNonPositive,
    CatalogIndistinguishable,
    NoiseModelInvalid,
    TeleopConfigInvalid,
    StockParamsInvalid,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("code serializes");
        f.write_str(s.as_str().unwrap_or("UNKNOWN"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.code, v.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a spec. Violations are data; the
/// function never fails.
pub fn validate_spec(spec: &WarehouseSpec) -> ValidationReport {
    use ViolationCode::*;
    let mut report = ValidationReport::default();

    let scalars = [spec.ceiling_height, spec.aisle_width];
    let walls_finite = spec.wall_polyline.iter().all(|p| p.is_finite());
    let racks_finite = spec.racks.iter().all(|r| {
        r.origin.is_finite()
            && r.orientation.is_finite()
            && r.cell_width.is_finite()
            && r.cell_height.is_finite()
            && r.cell_depth.is_finite()
    });
    let boxes_finite = spec
        .box_catalog
        .iter()
        .all(|b| b.dims.as_array().iter().all(|v| v.is_finite()));
    if !(scalars.iter().all(|v| v.is_finite()) && walls_finite && racks_finite && boxes_finite) {
        report.push(NonFinite, "spec contains NaN or infinite values");
        return report;
    }

    let walls = Polygon::from_polyline(&spec.wall_polyline);
    let walls_ok = if walls.is_degenerate() {
        report.push(
            WallsDegenerate,
            "wall polyline needs at least three non-collinear points",
        );
        false
    } else if walls.is_self_intersecting() {
        report.push(WallsSelfIntersecting, "wall polyline crosses itself");
        false
    } else {
        true
    };

    if spec.aisle_width <= 0.0 {
        report.push(AisleWidthNonPositive, "aisle_width must be positive");
    }

    if spec.racks.is_empty() {
        report.push(RacksEmpty, "at least one rack is required");
    }

    for (i, rack) in spec.racks.iter().enumerate() {
        if rack.tiers == 0 {
            report.push(RackTiersZero, format!("rack {i} has zero tiers"));
        }
        if rack.sections == 0 {
            report.push(RackSectionsZero, format!("rack {i} has zero sections"));
        }
        if rack.cell_width <= 0.0 || rack.cell_height <= 0.0 || rack.cell_depth <= 0.0 {
            report.push(
                RackCellNonPositive,
                format!("rack {i} has a non-positive cell dimension"),
            );
            continue;
        }
        if rack.height() > spec.ceiling_height {
            report.push(
                RackTooTall,
                format!(
                    "rack {i} is {:.3} m tall, ceiling is {:.3} m",
                    rack.height(),
                    spec.ceiling_height
                ),
            );
        }
        if walls_ok && rack.sections > 0 && !walls.contains_convex(&rack.footprint()) {
            report.push(RackOutsideWalls, format!("rack {i} footprint is not inside the walls"));
        }
    }

    let max_height = spec.max_rack_height();
    if !spec.racks.is_empty() && spec.ceiling_height <= max_height {
        report.push(
            CeilingTooLow,
            format!(
                "ceiling {:.3} m must exceed the tallest rack ({max_height:.3} m)",
                spec.ceiling_height
            ),
        );
    } else if spec.ceiling_height <= 0.0 {
        report.push(CeilingTooLow, "ceiling_height must be positive");
    }

    for i in 0..spec.racks.len() {
        for j in (i + 1)..spec.racks.len() {
            let (a, b) = (&spec.racks[i], &spec.racks[j]);
            if a.sections == 0 || b.sections == 0 {
                continue;
            }
            if convex_overlap(&a.footprint(), &b.footprint()) {
                report.push(RacksOverlap, format!("racks {i} and {j} overlap"));
            }
        }
    }

    if spec.box_catalog.is_empty() {
        report.push(CatalogEmpty, "box_catalog must list at least one box type");
    }
    let mut names = BTreeSet::new();
    for b in &spec.box_catalog {
        if !names.insert(b.name.as_str()) {
            report.push(CatalogDuplicateName, format!("box type `{}` listed twice", b.name));
        }
        if b.dims.as_array().iter().any(|v| *v <= 0.0) {
            report.push(
                BoxDimsNonPositive,
                format!("box type `{}` has a non-positive dimension", b.name),
            );
        }
    }
    for i in 0..spec.box_catalog.len() {
        for j in (i + 1)..spec.box_catalog.len() {
            let (a, b) = (&spec.box_catalog[i], &spec.box_catalog[j]);
            if a.dims.max_axis_distance(&b.dims) <= CATALOG_SEPARATION {
                report.push(
                    CatalogIndistinguishable,
                    format!(
                        "box types `{}` and `{}` differ by at most {CATALOG_SEPARATION} m on every axis",
                        a.name, b.name
                    ),
                );
            }
        }
    }

    if let Err(msg) = spec.sensor_noise.check() {
        report.push(NoiseModelInvalid, msg);
    }
    if let Err(msg) = spec.teleop.check() {
        report.push(TeleopConfigInvalid, msg);
    }
    let stock = spec.stock;
    if !(0.0..=1.0).contains(&stock.occupancy) || !(0.0..=1.0).contains(&stock.clutter) {
        report.push(StockParamsInvalid, "stock fractions must lie in [0, 1]");
    }

    report
}
