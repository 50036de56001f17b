//! Pixel-to-ground homographies and speed estimation.

mod calibration;
mod homography;
mod speed;

use thiserror::Error;

pub use calibration::{read_correspondences, write_correspondences};
pub use homography::{estimate_homography, Calibration, Correspondence, Homography};
pub use speed::{estimate_speed, SpeedSample, DEFAULT_SPEED_WINDOW};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate correspondences (points {points:?}): {reason}")]
    Degenerate { points: Vec<usize>, reason: String },
    #[error("homography is singular")]
    Singular,
    #[error("point ({x}, {y}) maps to infinity")]
    PointAtInfinity { x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("calibration file {path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("calibration file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
