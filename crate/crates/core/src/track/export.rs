use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Track, TrackError, TrackStatus};
use crate::classify::VehicleClass;

/// One line of the track export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub track_id: u64,
    pub frame_index: u64,
    pub cx: f64,
    pub cy: f64,
    pub vx: f64,
    pub vy: f64,
    pub class: Option<VehicleClass>,
    pub status: TrackStatus,
}

impl TrackRow {
    /// Rows of every track that was ever confirmed, trailing coasted frames
    /// dropped, ordered by track id then frame.
    pub fn from_tracks(tracks: &[Track]) -> Vec<TrackRow> {
        let mut ordered: Vec<&Track> = tracks.iter().filter(|t| t.was_confirmed()).collect();
        ordered.sort_by_key(|t| t.id);
        ordered
            .into_iter()
            .flat_map(|t| {
                let class = t.class();
                t.observed_history().iter().map(move |h| TrackRow {
                    track_id: t.id,
                    frame_index: h.frame_index,
                    cx: h.position[0],
                    cy: h.position[1],
                    vx: h.velocity[0],
                    vy: h.velocity[1],
                    class,
                    status: h.status,
                })
            })
            .collect()
    }
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> TrackError {
    TrackError::Csv {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes `track_id,frame_index,cx,cy,vx,vy,class,status`.
pub fn write_tracks_csv(path: &Path, rows: &[TrackRow]) -> Result<(), TrackError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

pub fn read_tracks_csv(path: &Path) -> Result<Vec<TrackRow>, TrackError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}
