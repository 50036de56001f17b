//! Geofenced violation rules over ground-plane track kinematics.

mod rules;
mod zones;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rules::{
    detect_crosswalk_obstruction, detect_double_parking, detect_lane_change_violation,
    detect_violations, lane_indices, SpeedWindow, TrackMotion, ViolationConfig,
};
pub use zones::{
    is_simple_polygon, point_in_polygon, polyline_distance, ApproachAxis, CoordFrame, Lane, Zone,
    ZoneFile, ZoneKind,
};

#[derive(Debug, Error)]
pub enum ViolationError {
    #[error("zone file: {0}")]
    Layout(String),
    #[error("lane-change rule needs lane centerlines")]
    MissingLaneGeometry,
    #[error("invalid violation config: {0}")]
    InvalidConfig(String),
    #[error("event log {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    IllegalLaneChange,
    DoubleParking,
    CrosswalkObstruction,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::IllegalLaneChange => "illegal_lane_change",
            ViolationKind::DoubleParking => "double_parking",
            ViolationKind::CrosswalkObstruction => "crosswalk_obstruction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub track_id: u64,
    pub kind: ViolationKind,
    pub zone_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    /// Kind-specific measurements such as `dwell_s` or `distance_m`.
    pub evidence: BTreeMap<String, f64>,
}

/// Canonical event order: start frame, track, kind, zone.
pub fn sort_events(events: &mut [ViolationEvent]) {
    events.sort_by(|a, b| {
        (a.start_frame, a.track_id, a.kind, &a.zone_id).cmp(&(
            b.start_frame,
            b.track_id,
            b.kind,
            &b.zone_id,
        ))
    });
}

/// One JSON object per line.
pub fn write_events_jsonl(path: &Path, events: &[ViolationEvent]) -> Result<(), ViolationError> {
    let io = |source| ViolationError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for e in events {
        serde_json::to_writer(&mut f, e).map_err(|e| io(e.into()))?;
        f.write_all(b"\n").map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_events_jsonl(path: &Path) -> Result<Vec<ViolationEvent>, ViolationError> {
    let io = |source| ViolationError::Io {
        path: path.display().to_string(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| io(e.into())))
        .collect()
}
