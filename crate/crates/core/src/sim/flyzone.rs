use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_overlap, DVec2, DVec3, Polygon};
use crate::warehouse::WarehouseSpec;

pub const CELL_SIZE: f64 = 0.25;
pub const RACK_INFLATION: f64 = 0.5;
pub const CEILING_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FlyZoneError {
    #[error("position ({0}, {1}, {2}) is not covered by the fly-zone map")]
    OutsideMap(f64, f64, f64),
}

/// Boolean 3D occupancy grid over the wall bounding box. `true` = flyable.
#[derive(Debug, Clone, PartialEq)]
pub struct FlyZoneMap {
    origin: DVec3,
    dims: [usize; 3],
    cells: Vec<bool>,
    /// Twin revision (or spec hash) the map was built from.
    pub derived_from: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl FlyZoneMap {
    /// A cell is flyable when it lies fully inside the walls, does not touch
    /// any rack volume inflated by [`RACK_INFLATION`], and its top is at or
    /// below `ceiling - CEILING_MARGIN`.
    pub fn build(spec: &WarehouseSpec, derived_from: u64) -> Self {
        let walls = Polygon::from_polyline(&spec.wall_polyline);
        let (lo, hi) = walls.bounds();
        let nx = ((hi.x - lo.x) / CELL_SIZE).ceil().max(1.0) as usize;
        let ny = ((hi.y - lo.y) / CELL_SIZE).ceil().max(1.0) as usize;
        let nz = (spec.ceiling_height / CELL_SIZE).ceil().max(1.0) as usize;
        let top_limit = spec.ceiling_height - CEILING_MARGIN;
        let racks: Vec<([DVec2; 4], f64)> = spec
            .racks
            .iter()
            .map(|r| (r.inflated_footprint(RACK_INFLATION), r.height() + RACK_INFLATION))
            .collect();

        let mut cells = vec![false; nx * ny * nz];
        for j in 0..ny {
            for i in 0..nx {
                let x0 = lo.x + i as f64 * CELL_SIZE;
                let y0 = lo.y + j as f64 * CELL_SIZE;
                let quad = [
                    DVec2::new(x0, y0),
                    DVec2::new(x0 + CELL_SIZE, y0),
                    DVec2::new(x0 + CELL_SIZE, y0 + CELL_SIZE),
                    DVec2::new(x0, y0 + CELL_SIZE),
                ];
                if !walls.contains_convex(&quad) {
                    continue;
                }
                let overlapping: Vec<f64> = racks
                    .iter()
                    .filter(|(fp, _)| convex_overlap(&quad, fp))
                    .map(|(_, h)| *h)
                    .collect();
                for k in 0..nz {
                    let z0 = k as f64 * CELL_SIZE;
                    let z1 = z0 + CELL_SIZE;
                    if z1 > top_limit + 1e-9 {
                        break;
                    }
                    if overlapping.iter().any(|h| z0 < *h) {
                        continue;
                    }
                    cells[(k * ny + j) * nx + i] = true;
                }
            }
        }
        Self {
            origin: lo.extend(0.0),
            dims: [nx, ny, nz],
            cells,
            derived_from,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_of(&self, p: DVec3) -> Option<CellIndex> {
        let r = (p - self.origin) / CELL_SIZE;
        if !r.is_finite() || r.x < 0.0 || r.y < 0.0 || r.z < 0.0 {
            return None;
        }
        let (i, j, k) = (r.x.floor() as usize, r.y.floor() as usize, r.z.floor() as usize);
        (i < self.dims[0] && j < self.dims[1] && k < self.dims[2]).then_some(CellIndex { i, j, k })
    }

    pub fn cell_flyable(&self, c: CellIndex) -> bool {
        self.cells[(c.k * self.dims[1] + c.j) * self.dims[0] + c.i]
    }

    /// Whether `p` lies in a flyable cell. Points off the grid are not.
    pub fn is_flyable(&self, p: DVec3) -> bool {
        self.cell_of(p).is_some_and(|c| self.cell_flyable(c))
    }

    pub fn cell_bounds(&self, c: CellIndex) -> (DVec3, DVec3) {
        let lo = self.origin + DVec3::new(c.i as f64, c.j as f64, c.k as f64) * CELL_SIZE;
        (lo, lo + DVec3::splat(CELL_SIZE))
    }

    pub fn flyable_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Every cell crossed by the straight move from `a` to `b` is flyable.
    pub fn segment_clear(&self, a: DVec3, b: DVec3) -> bool {
        let d = b - a;
        let n = ((d.abs().max_element() / (CELL_SIZE * 0.25)).ceil() as usize).max(1);
        (0..=n).all(|s| self.is_flyable(a + d * (s as f64 / n as f64)))
    }
}

/// Zeroes, axis by axis (x, then y, then z), each velocity component whose
/// move would enter a no-fly cell. The three legs are applied in sequence,
/// so the returned velocity lands in a flyable cell whenever `pos` is in one.
pub fn clamp_to_flyzone(map: &FlyZoneMap, pos: DVec3, cmd_v: DVec3, dt: f64) -> Result<DVec3, FlyZoneError> {
    if map.cell_of(pos).is_none() {
        return Err(FlyZoneError::OutsideMap(pos.x, pos.y, pos.z));
    }
    let mut out = cmd_v;
    let mut at = pos;
    for axis in 0..3 {
        if out[axis] == 0.0 {
            continue;
        }
        let mut step = DVec3::ZERO;
        step[axis] = out[axis] * dt;
        let next = at + step;
        if map.segment_clear(at, next) {
            at = next;
        } else {
            out[axis] = 0.0;
        }
    }
    Ok(out)
}
