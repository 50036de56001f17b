//! Seeded synthetic aerial scenes with exact ground truth.
//!
//! Vehicles follow piecewise constant-velocity paths on the ground plane and
//! are drawn as scaled, rotated class patterns at the pixel positions given
//! by the inverse of the scene homography.

mod appearance;
mod output;
mod render;
mod scenario;
mod truth;

use thiserror::Error;

use crate::imaging::ImagingError;

pub use appearance::{body_template, default_color, detector_template, TEMPLATE_CLASSES};
pub use output::{
    calibration_points, write_scenario, CALIBRATION_FILE, FRAMES_DIR, GT_FILE, TEMPLATES_FILE,
    ZONES_FILE,
};
pub use render::{generate, SynthOutput};
pub use scenario::{Background, Marking, Occlusion, ScenarioConfig, Segment, VehicleSpec};
pub use truth::{GroundTruth, GtBox, GtTrajectory, GtViolation};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("vehicle {vehicle} leaves the frame at frame {frame}")]
    OutOfFrame { vehicle: u64, frame: u64 },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[cfg(test)]
mod tests;
