//! Vehicle detection, tracking and traffic analytics for nadir aerial imagery.
//!
//! The crate is organised as a chain of stages that can also be used on their
//! own:
//!
//! - [`imaging`]: 8-bit frames, PGM/PPM I/O and the preprocessing filters.
//! - [`detect`]: multi-scale, multi-angle NCC template matching plus NMS.
//! - [`classify`]: rule-based assignment of detections to vehicle classes.
//! - [`track`]: constant-velocity Kalman tracking with Hungarian association.
//! - [`geometry`]: pixel-to-ground homographies and speed estimation.
//! - [`violations`]: geofenced double parking, crosswalk and lane-change rules.
//! - [`analytics`]: counts, OD matrices, congestion clusters and MOT metrics.
//! - [`synth`]: deterministic synthetic scenes with exact ground truth.

pub mod analytics;
pub mod classify;
pub mod detect;
pub mod geometry;
pub mod imaging;
pub mod synth;
pub mod track;
pub mod violations;

pub use classify::VehicleClass;
pub use detect::{Detection, RotatedBox, Template};
pub use geometry::Homography;
pub use imaging::Frame;
pub use track::{Track, TrackStatus};
pub use violations::{ViolationEvent, ViolationKind};

/// A 2-D point, either in pixels or in ground-plane meters depending on context.
pub type Point = [f64; 2];
