use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::analytics::{Crossing, GtObject};
use crate::detect::RotatedBox;
use crate::geometry::Homography;
use crate::violations::{
    lane_indices, point_in_polygon, ViolationConfig, ViolationKind, ZoneFile, ZoneKind,
};
use crate::{Point, VehicleClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub frame_index: u64,
    pub track_id: u64,
    pub class: VehicleClass,
    pub bbox: RotatedBox,
    pub occluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtTrajectory {
    pub track_id: u64,
    pub class: VehicleClass,
    pub frames: Vec<u64>,
    pub world: Vec<Point>,
    pub pixel: Vec<Point>,
    /// Scripted speed of the step leaving each frame.
    pub speed_kmh: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtViolation {
    pub track_id: u64,
    pub kind: ViolationKind,
    pub zone_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frames: u64,
    pub homography: Homography,
    /// Sorted by frame, then track.
    pub boxes: Vec<GtBox>,
    pub trajectories: Vec<GtTrajectory>,
    pub violations: Vec<GtViolation>,
    /// Gate crossings of the exact trajectories, gates indexed as in the layout.
    pub crossings: Vec<Crossing>,
}

impl GroundTruth {
    /// Boxes for scoring; occluded ones are marked as ignored.
    pub fn mot_objects(&self) -> Vec<GtObject> {
        self.boxes
            .iter()
            .map(|b| GtObject {
                frame_index: b.frame_index,
                id: b.track_id,
                bbox: b.bbox,
                ignore: b.occluded,
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let text = serde_json::to_string_pretty(self).expect("ground truth serializes");
        std::fs::write(path, text + "\n").map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let err = |reason: String| SynthError::Io {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

/// Violations implied by the script: stationary spans longer than the dwell
/// limit inside no-parking zones or crosswalks, and lane switches inside a
/// U-turn approach closer than `d_max_m` to the stop line.
pub(crate) fn scripted_violations(
    trajectories: &[GtTrajectory],
    layout: &ZoneFile,
    cfg: &ViolationConfig,
    fps: f64,
) -> Vec<GtViolation> {
    let mut out = Vec::new();
    for t in trajectories {
        // a stop spans frames a..=b with identical positions, lasting (b - a) / fps
        let mut a = 0;
        while a < t.frames.len() {
            let mut b = a;
            while b + 1 < t.frames.len() && t.world[b + 1] == t.world[a] {
                b += 1;
            }
            let held_s = (t.frames[b] - t.frames[a]) as f64 / fps;
            if held_s > cfg.dwell_s {
                for (kind, zk) in [
                    (ViolationKind::DoubleParking, ZoneKind::NoParking),
                    (ViolationKind::CrosswalkObstruction, ZoneKind::Crosswalk),
                ] {
                    for z in layout
                        .zones_of(zk)
                        .filter(|z| point_in_polygon(t.world[a], &z.polygon))
                    {
                        out.push(GtViolation {
                            track_id: t.track_id,
                            kind,
                            zone_id: z.id.clone(),
                            start_frame: t.frames[a],
                            end_frame: t.frames[b],
                        });
                    }
                }
            }
            a = b + 1;
        }
        if layout.lanes.is_empty() {
            continue;
        }
        let lanes = lane_indices(&t.world, &layout.lanes);
        for k in 1..lanes.len() {
            if lanes[k] == lanes[k - 1] {
                continue;
            }
            let p = t.world[k];
            for z in layout.zones_of(ZoneKind::UturnApproach) {
                let d = z.axis.map_or(f64::NAN, |ax| ax.distance_to_stop(p));
                if point_in_polygon(p, &z.polygon) && (0.0..cfg.d_max_m).contains(&d) {
                    out.push(GtViolation {
                        track_id: t.track_id,
                        kind: ViolationKind::IllegalLaneChange,
                        zone_id: z.id.clone(),
                        start_frame: t.frames[k - 1],
                        end_frame: t.frames[k],
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        (a.start_frame, a.track_id, a.kind, &a.zone_id).cmp(&(
            b.start_frame,
            b.track_id,
            b.kind,
            &b.zone_id,
        ))
    });
    out
}
