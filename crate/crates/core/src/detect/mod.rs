//! Template matching over a scale/angle grid, rotated boxes and suppression.

mod boxes;
mod export;
mod matcher;
mod ncc;
mod nms;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boxes::{clip_convex, normalize_angle, polygon_area, rotated_iou, RotatedBox};
pub use export::{read_detections_csv, write_detections_csv};
pub use matcher::{angle_grid, match_template, BoxMode, Detector, MatchConfig};
pub use ncc::{ncc_score, response_map, response_maps_with, FrameSpectrum, ResponseMap};
pub use nms::{nms, rank_order, soft_nms, SoftNmsMode};
pub(crate) use template::rotated_extent;
pub use template::{rotate_template, Template, TemplateSet, TemplateSpec};

use crate::classify::VehicleClass;
use crate::imaging::ImagingError;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("template {template:?} does not fit in frame {frame:?}")]
    TemplateTooLarge {
        template: (usize, usize),
        frame: (usize, usize),
    },
    #[error("template placed at ({x}, {y}) leaves the frame")]
    OutOfBounds { x: usize, y: usize },
    #[error("invalid detection config: {0}")]
    InvalidConfig(String),
    #[error("detections file {path}: {reason}")]
    Csv { path: String, reason: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// One matched vehicle hypothesis in level-0 pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: RotatedBox,
    /// Matched template size `[w, h]` in level-0 pixels. Equals the box
    /// sides unless boxes are emitted axis-aligned.
    pub footprint: [f64; 2],
    /// NCC score in `[-1, 1]`.
    pub score: f64,
    pub scale_index: usize,
    /// Template orientation in radians at which the peak was found.
    pub angle: f64,
    pub frame_index: u64,
    pub template_index: usize,
    pub class_hint: Option<VehicleClass>,
}

impl Detection {
    pub fn new(bbox: RotatedBox, score: f64) -> Self {
        Self {
            bbox,
            footprint: [bbox.w, bbox.h],
            score,
            scale_index: 0,
            angle: bbox.theta,
            frame_index: 0,
            template_index: 0,
            class_hint: None,
        }
    }

    pub fn at_frame(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }
}
