//! Flow counts, origin-destination matrices, congestion clustering and
//! detection/tracking scores.

mod cluster;
mod export;
mod flow;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::violations::CoordFrame;
use crate::Point;

pub use cluster::{congestion_clusters, dbscan, CongestionConfig, CongestionRegion};
pub use export::{
    write_congestion_jsonl, write_correlation_csv, write_counts_csv, write_heatmap_csv, write_json,
    write_od_csv,
};
pub use flow::{
    class_correlation, count_crossings, crossings, heatmap_grid, od_matrix, pearson,
    CorrelationMatrix, CountTable, Crossing, OdMatrix, TrackPath,
};
pub use metrics::{
    evaluate_detections, evaluate_mot, DetectionReport, GtObject, MotReport, PredObject,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("class correlation needs at least 2 observation points, got {0}")]
    TooFewPoints(usize),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("prediction frame {frame} outside ground-truth range {first}..={last}")]
    FrameRange { frame: u64, first: u64, last: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

/// Counting line. Crossing from its left (negative cross product) to its
/// right side or back counts, provided the step passes through the segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub id: String,
    #[serde(default)]
    pub frame: CoordFrame,
    pub segment: [Point; 2],
}
