//! Constant-velocity Kalman tracking with Hungarian association.

mod export;
mod hungarian;
mod kalman;
mod tracker;

use thiserror::Error;

pub use export::{read_tracks_csv, write_tracks_csv, TrackRow};
pub use hungarian::hungarian;
pub use kalman::{
    kf_predict, kf_update, position_measurement, transition, white_acceleration_q, KalmanState,
    NoiseModel, NoiseParams,
};
pub use tracker::{HistoryEntry, Track, TrackStatus, Tracker, TrackerConfig};

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("innovation covariance is singular; measurement noise must be positive definite")]
    SingularInnovation,
    #[error("measurement is not finite")]
    NonFiniteMeasurement,
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error("frame {got} does not follow frame {previous}")]
    FrameOrder { previous: u64, got: u64 },
    #[error("detection from frame {got} passed with frame {expected}")]
    MixedFrames { expected: u64, got: u64 },
    #[error("tracks file {path}: {reason}")]
    Csv { path: String, reason: String },
}
