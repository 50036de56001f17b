use serde::{Deserialize, Serialize};

use super::{GeometryError, Homography};
use crate::Point;

/// About half a second at 25 fps.
pub const DEFAULT_SPEED_WINDOW: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub frame_index: u64,
    pub speed_kmh: f64,
}

/// Ground speed along a pixel trajectory.
///
/// Positions are projected to meters. For every position at least `window`
/// frames after the first one, the speed is the ground path length over the
/// trailing `window` frames divided by the elapsed time of that stretch.
/// Tracks spanning fewer than `window` frames yield one sample over their
/// whole span. Positions must be in strictly increasing frame order.
pub fn estimate_speed(
    positions: &[(u64, Point)],
    h: &Homography,
    fps: f64,
    window: u64,
) -> Result<Vec<SpeedSample>, GeometryError> {
    if !(fps > 0.0) || window == 0 {
        return Err(GeometryError::InvalidParameter(format!(
            "fps must be positive and window at least 1 (got {fps}, {window})"
        )));
    }
    if positions.len() < 2 {
        return Err(GeometryError::TooFewPoints {
            needed: 2,
            got: positions.len(),
        });
    }
    if let Some(w) = positions.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(GeometryError::InvalidParameter(format!(
            "frame {} does not follow frame {}",
            w[1].0, w[0].0
        )));
    }
    let world = positions
        .iter()
        .map(|&(_, p)| h.project(p))
        .collect::<Result<Vec<_>, _>>()?;
    // cumulative ground path length
    let mut path = vec![0.0; world.len()];
    for i in 1..world.len() {
        path[i] =
            path[i - 1] + (world[i][0] - world[i - 1][0]).hypot(world[i][1] - world[i - 1][1]);
    }
    let frame = |i: usize| positions[i].0;
    let sample = |j: usize, i: usize| SpeedSample {
        frame_index: frame(i),
        speed_kmh: (path[i] - path[j]) / ((frame(i) - frame(j)) as f64 / fps) * 3.6,
    };

    let first = frame(0);
    let mut out = Vec::new();
    let mut j = 0;
    for i in 1..positions.len() {
        if frame(i) - first < window {
            continue;
        }
        while frame(i) - frame(j + 1) >= window {
            j += 1;
        }
        out.push(sample(j, i));
    }
    if out.is_empty() {
        out.push(sample(0, positions.len() - 1));
    }
    Ok(out)
}
