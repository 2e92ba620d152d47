//! Deterministic stand-in for the UAV camera: an orthographic rack-face view
//! with per-slot display states, plus content-addressed pallet photos.

use std::collections::BTreeSet;
use std::fmt;

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{segments_intersect, DVec2, Polygon, Pose3D};
use crate::warehouse::{BoxDims, DigitalTwin, GroundTruth, RackFace, SlotAddress, SlotState};

/// How far the camera sees, meters.
pub const VIEW_RANGE: f64 = 6.0;
/// Horizontal half field of view, radians.
pub const HALF_FOV: f64 = 0.61;
pub const RASTER_WIDTH: u32 = 64;
pub const RASTER_HEIGHT: u32 = 48;

/// `sha256:<hex>` of a rendered image.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SnapshotRef(String);

impl SnapshotRef {
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(format!("sha256:{}", hex::encode(Sha256::digest(bytes))))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Hex digest without the scheme prefix, usable as a file name.
    pub fn digest(&self) -> &str {
        self.0.strip_prefix("sha256:").unwrap_or(&self.0)
    }

    pub fn parse(s: &str) -> Option<Self> {
        let hex = s.strip_prefix("sha256:")?;
        (hex.len() == 64 && hex.bytes().all(|b| b.is_ascii_hexdigit())).then(|| Self(s.to_owned()))
    }
}

impl fmt::Display for SnapshotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// RGB8 image, row-major from the top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl Raster {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Fills the half-open pixel rectangle, clipped to the image.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
        let (w, h) = (i64::from(self.width), i64::from(self.height));
        for y in y0.max(0)..y1.min(h) {
            for x in x0.max(0)..x1.min(w) {
                self.pixels[(y * w + x) as usize] = color;
            }
        }
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn to_base64_ppm(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_ppm())
    }
}

/// Photo taken at verification time: the pallet outline scaled to its
/// measured size, with the barcode bytes drawn as bars.
pub fn slot_photo(addr: &SlotAddress, barcode_id: &str, measured: &BoxDims) -> Raster {
    let mut img = Raster::new(RASTER_WIDTH, RASTER_HEIGHT, palette::BACKGROUND);
    let scale = 40.0;
    let bw = (measured.w * scale).round() as i64;
    let bh = (measured.h * scale).round() as i64;
    let x0 = (i64::from(RASTER_WIDTH) - bw) / 2;
    let y1 = i64::from(RASTER_HEIGHT) - 2;
    img.fill_rect(x0, y1 - bh, x0 + bw, y1, palette::BOX);
    let mut x = x0 + 2;
    for byte in barcode_id.bytes().chain(addr.to_string().bytes()) {
        let bar = i64::from(byte % 3 + 1);
        img.fill_rect(x, y1 - bh + 2, x + bar, y1 - bh + 8, palette::BAR);
        x += bar + 1;
        if x >= x0 + bw - 2 {
            break;
        }
    }
    img
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayState {
    Plain,
    /// Red: a target that still has to be scanned.
    NeedsScan,
    /// Green: a scanned pallet.
    Scanned,
    Candidate,
    Verified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleSlot {
    pub address: SlotAddress,
    pub display: DisplayState,
    /// Whether the camera sees something on the shelf.
    pub occupied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFrame {
    pub twin_revision: u64,
    pub uav_pose: Pose3D,
    pub face: Option<RackFace>,
    pub slots: Vec<VisibleSlot>,
    /// Base64 PPM of the rendered view, if requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raster_ppm_b64: Option<String>,
}

/// Slots the operator was asked to find. When non-empty, targets render
/// red until verified and green after; other verified slots render as
/// plain `Verified`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Highlights {
    pub targets: BTreeSet<SlotAddress>,
}

pub fn display_state(twin: &DigitalTwin, highlights: &Highlights, addr: &SlotAddress) -> DisplayState {
    let state = twin.slot(addr).unwrap_or(&SlotState::Empty);
    if highlights.targets.contains(addr) {
        return if state.is_verified() {
            DisplayState::Scanned
        } else {
            DisplayState::NeedsScan
        };
    }
    match state {
        SlotState::Empty => DisplayState::Plain,
        SlotState::Unverified { .. } => DisplayState::Candidate,
        SlotState::Verified { .. } if highlights.targets.is_empty() => DisplayState::Scanned,
        SlotState::Verified { .. } => DisplayState::Verified,
    }
}

/// The face the camera looks at, if any: nearest face hit by the optical
/// axis within [`VIEW_RANGE`], unless a wall is closer.
pub fn faced_face(twin: &DigitalTwin, uav: &Pose3D) -> Option<(RackFace, f64, f64)> {
    let spec = twin.spec();
    let eye = uav.position.truncate();
    let dir = uav.heading();
    let mut best: Option<(RackFace, f64, f64)> = None;
    for face in spec.reachable_faces() {
        let g = spec.face_geometry(face)?;
        let dist = g.distance(eye);
        let closing = -dir.dot(g.normal);
        if dist <= 0.0 || closing < 0.5 {
            continue;
        }
        let t = dist / closing;
        if t > VIEW_RANGE {
            continue;
        }
        let along = g.along(eye + dir * t);
        if along < 0.0 || along > g.length {
            continue;
        }
        if best.is_none_or(|(_, bt, _)| t < bt) {
            best = Some((face, t, along));
        }
    }
    let (face, t, along) = best?;
    let walls = Polygon::from_polyline(&spec.wall_polyline);
    let hit = eye + dir * (t - 1e-6);
    if walls.edges().any(|(a, b)| segments_intersect(eye, hit, a, b)) {
        return None;
    }
    Some((face, t, along))
}

pub fn render_view(
    twin: &DigitalTwin,
    truth: &GroundTruth,
    uav: &Pose3D,
    highlights: &Highlights,
    with_raster: bool,
) -> ViewFrame {
    let mut frame = ViewFrame {
        twin_revision: twin.revision(),
        uav_pose: *uav,
        face: None,
        slots: Vec::new(),
        raster_ppm_b64: None,
    };
    let Some((face, range, center)) = faced_face(twin, uav) else {
        if with_raster {
            frame.raster_ppm_b64 = Some(Raster::new(RASTER_WIDTH, RASTER_HEIGHT, palette::WALL).to_base64_ppm());
        }
        return frame;
    };
    let spec = twin.spec();
    let g = spec.face_geometry(face).expect("faced face exists");
    let half_w = (range * HALF_FOV.tan()).max(0.5);
    let half_h = half_w * f64::from(RASTER_HEIGHT) / f64::from(RASTER_WIDTH);
    let z0 = uav.position.z;
    // Mirror image so that "left" on screen is left for the viewer.
    let to_px = |along: f64, z: f64| -> (f64, f64) {
        let u = (center - along) / (2.0 * half_w) + 0.5;
        let u = if g.normal.perp_dot(uav.heading()) >= 0.0 {
            u
        } else {
            1.0 - u
        };
        let v = (z0 - z) / (2.0 * half_h) + 0.5;
        (u * f64::from(RASTER_WIDTH), v * f64::from(RASTER_HEIGHT))
    };
    let mut img = with_raster.then(|| Raster::new(RASTER_WIDTH, RASTER_HEIGHT, palette::BACKGROUND));
    for addr in spec.face_addresses(face) {
        let c = g.slot_center(addr.section, addr.tier);
        let along = g.along(DVec2::new(c.x, c.y));
        if (along - center).abs() > half_w || (c.z - z0).abs() > half_h {
            continue;
        }
        let display = display_state(twin, highlights, &addr);
        let occupied = truth.occupant(&addr).is_some() || truth.clutter().contains(&addr);
        if let Some(img) = img.as_mut() {
            let (ax, ay) = to_px(along - g.cell_width / 2.0, c.z + g.cell_height / 2.0);
            let (bx, by) = to_px(along + g.cell_width / 2.0, c.z - g.cell_height / 2.0);
            let (x0, x1) = (ax.min(bx) as i64, ax.max(bx) as i64);
            let (y0, y1) = (ay.min(by) as i64, ay.max(by) as i64);
            img.fill_rect(x0, y0, x1, y1, palette::for_state(display));
            if occupied {
                img.fill_rect(x0 + 2, y0 + 2, x1 - 2, y1 - 1, palette::BOX);
            }
        }
        frame.slots.push(VisibleSlot {
            address: addr,
            display,
            occupied,
        });
    }
    frame.face = Some(face);
    frame.raster_ppm_b64 = img.map(|i| i.to_base64_ppm());
    frame
}

mod palette {
    use super::DisplayState;

    pub const BACKGROUND: [u8; 3] = [24, 24, 28];
    pub const WALL: [u8; 3] = [90, 90, 90];
    pub const BOX: [u8; 3] = [176, 132, 80];
    pub const BAR: [u8; 3] = [10, 10, 10];

    pub fn for_state(s: DisplayState) -> [u8; 3] {
        match s {
            DisplayState::Plain => [70, 70, 80],
            DisplayState::NeedsScan => [220, 30, 30],
            DisplayState::Scanned => [30, 200, 60],
            DisplayState::Candidate => [230, 200, 40],
            DisplayState::Verified => [40, 120, 220],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DVec3;
    use crate::scan::{VerificationRecord, VerificationStatus};
    use crate::warehouse::testing::small_spec;
    use crate::warehouse::{generate_twin, Side};

    fn verified(addr: SlotAddress) -> VerificationRecord {
        VerificationRecord {
            address: addr,
            status: VerificationStatus::Verified {
                barcode_id: "PLT-9".into(),
            },
            attempts: 1,
            measured_dims: None,
            classified_type: None,
            snapshot_ref: Some(SnapshotRef::from_bytes(b"x")),
        }
    }

    fn facing(twin: &DigitalTwin, addr: SlotAddress) -> Pose3D {
        let slot = twin.slot_pose(&addr).unwrap();
        let p = slot.position + (slot.heading() * 1.2).extend(0.0);
        Pose3D::new(p, crate::geometry::wrap_angle(slot.yaw + std::f64::consts::PI))
    }

    #[test]
    fn snapshot_ref_shape() {
        let r = SnapshotRef::from_bytes(b"abc");
        assert_eq!(
            r.as_str(),
            "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(SnapshotRef::parse(r.as_str()), Some(r.clone()));
        assert_eq!(SnapshotRef::parse("md5:00"), None);
    }

    #[test]
    fn verified_slot_is_green() {
        let spec = small_spec(1, 3, 4);
        let mut twin = generate_twin(&spec).unwrap();
        let a = SlotAddress::new(0, Side::Front, 1, 1);
        twin.apply_verification(&verified(a)).unwrap();
        let view = render_view(
            &twin,
            &GroundTruth::default(),
            &facing(&twin, a),
            &Highlights::default(),
            true,
        );
        assert_eq!(view.face, Some(a.face()));
        let s = view.slots.iter().find(|s| s.address == a).unwrap();
        assert_eq!(s.display, DisplayState::Scanned);
        assert!(view
            .slots
            .iter()
            .filter(|s| s.address != a)
            .all(|s| s.display == DisplayState::Plain));
        assert_eq!(view.twin_revision, 1);
        assert!(view.raster_ppm_b64.is_some());
    }

    #[test]
    fn unscanned_target_is_red_then_green() {
        let spec = small_spec(1, 3, 4);
        let mut twin = generate_twin(&spec).unwrap();
        let a = SlotAddress::new(0, Side::Back, 2, 0);
        let hl = Highlights { targets: [a].into() };
        let pose = facing(&twin, a);
        let before = render_view(&twin, &GroundTruth::default(), &pose, &hl, false);
        assert_eq!(
            before.slots.iter().find(|s| s.address == a).unwrap().display,
            DisplayState::NeedsScan
        );
        twin.apply_verification(&verified(a)).unwrap();
        let after = render_view(&twin, &GroundTruth::default(), &pose, &hl, false);
        assert_eq!(
            after.slots.iter().find(|s| s.address == a).unwrap().display,
            DisplayState::Scanned
        );
    }

    #[test]
    fn facing_a_wall_shows_nothing() {
        let spec = small_spec(1, 3, 4);
        let twin = generate_twin(&spec).unwrap();
        // Just inside the left wall, looking at it.
        let pose = Pose3D::new(DVec3::new(0.5, 1.0, 1.0), std::f64::consts::PI);
        let view = render_view(&twin, &GroundTruth::default(), &pose, &Highlights::default(), false);
        assert!(view.face.is_none() && view.slots.is_empty());
        // Back to the face: also nothing.
        let a = SlotAddress::new(0, Side::Front, 0, 0);
        let mut away = facing(&twin, a);
        away.yaw += std::f64::consts::PI;
        assert!(
            render_view(&twin, &GroundTruth::default(), &away, &Highlights::default(), false)
                .slots
                .is_empty()
        );
    }

    #[test]
    fn deterministic() {
        let spec = small_spec(2, 3, 4);
        let twin = generate_twin(&spec).unwrap();
        let truth = GroundTruth::generate(&spec, 3);
        let pose = facing(&twin, SlotAddress::new(1, Side::Front, 2, 1));
        let a = render_view(&twin, &truth, &pose, &Highlights::default(), true);
        let b = render_view(&twin, &truth, &pose, &Highlights::default(), true);
        assert_eq!(a, b);
        assert!(a.slots.iter().any(|s| s.occupied) || truth.occupied_count() == 0);
    }
}
