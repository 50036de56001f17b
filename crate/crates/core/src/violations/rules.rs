use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    point_in_polygon, polyline_distance, sort_events, ViolationError, ViolationEvent,
    ViolationKind, Zone, ZoneFile, ZoneKind,
};
use crate::geometry::{estimate_speed, GeometryError, Homography};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViolationConfig {
    /// Below this speed a vehicle counts as stopped.
    pub v_stop_kmh: f64,
    /// A stop must last longer than this to be a violation.
    pub dwell_s: f64,
    /// Lane changes closer than this to the U-turn stop line are flagged.
    pub d_max_m: f64,
    /// Longest exit-and-reenter gap, in frames, that does not break a dwell.
    pub bridge_frames: u64,
    /// Frames a new lane index must persist before it counts as a change.
    pub lane_hold_frames: usize,
}

impl Default for ViolationConfig {
    fn default() -> Self {
        Self {
            v_stop_kmh: 2.0,
            dwell_s: 10.0,
            d_max_m: 100.0,
            bridge_frames: 2,
            lane_hold_frames: 3,
        }
    }
}

impl ViolationConfig {
    pub fn validate(&self) -> Result<(), ViolationError> {
        if !(self.v_stop_kmh > 0.0 && self.dwell_s > 0.0 && self.d_max_m > 0.0)
            || self.lane_hold_frames == 0
        {
            return Err(ViolationError::InvalidConfig(
                "v_stop_kmh, dwell_s, d_max_m must be positive and lane_hold_frames at least 1"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Frames a dwell must exceed.
    pub fn dwell_frames(&self, fps: f64) -> u64 {
        (self.dwell_s * fps - 1e-9).ceil() as u64
    }
}

/// Average speed over the frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedWindow {
    pub start_frame: u64,
    pub end_frame: u64,
    pub speed_kmh: f64,
}

/// A track on the ground plane: positions in meters plus windowed speeds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackMotion {
    pub track_id: u64,
    pub frames: Vec<u64>,
    pub world: Vec<Point>,
    pub speeds: Vec<SpeedWindow>,
}

impl TrackMotion {
    /// Projects pixel positions and estimates speeds with a trailing window.
    pub fn from_pixels(
        track_id: u64,
        positions: &[(u64, Point)],
        h: &Homography,
        fps: f64,
        window: u64,
    ) -> Result<Self, GeometryError> {
        let world = positions
            .iter()
            .map(|&(_, p)| h.project(p))
            .collect::<Result<Vec<_>, _>>()?;
        let frames: Vec<u64> = positions.iter().map(|&(f, _)| f).collect();
        let speeds = match estimate_speed(positions, h, fps, window) {
            Ok(samples) => samples
                .into_iter()
                .map(|s| SpeedWindow {
                    start_frame: frames[0].max(s.frame_index.saturating_sub(window)),
                    end_frame: s.frame_index,
                    speed_kmh: s.speed_kmh,
                })
                .collect(),
            Err(GeometryError::TooFewPoints { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        Ok(Self {
            track_id,
            frames,
            world,
            speeds,
        })
    }

    /// Per-sample flag: covered by at least one window slower than `v_stop`.
    pub fn stationary(&self, v_stop_kmh: f64) -> Vec<bool> {
        let mut out = vec![false; self.frames.len()];
        let mut first = 0;
        for w in self.speeds.iter().filter(|w| w.speed_kmh < v_stop_kmh) {
            // windows arrive in increasing frame order
            while first < self.frames.len() && self.frames[first] < w.start_frame {
                first += 1;
            }
            for (i, &f) in self.frames.iter().enumerate().skip(first) {
                if f > w.end_frame {
                    break;
                }
                out[i] = true;
            }
        }
        out
    }
}

/// Runs of consecutive frames where `flag` holds, with gaps of at most
/// `bridge` frames closed. Frames absent from `frames` count as false.
fn runs(frames: &[u64], flag: &[bool], bridge: u64) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (&f, _) in frames.iter().zip(flag).filter(|(_, &b)| b) {
        match out.last_mut() {
            Some((_, end)) if f - *end - 1 <= bridge => *end = f,
            _ => out.push((f, f)),
        }
    }
    out
}

fn dwell_events(
    kind: ViolationKind,
    zone_kind: ZoneKind,
    tracks: &[TrackMotion],
    zones: &ZoneFile,
    cfg: &ViolationConfig,
    fps: f64,
) -> Vec<ViolationEvent> {
    let need = cfg.dwell_frames(fps);
    let mut events = Vec::new();
    for t in tracks {
        let still = t.stationary(cfg.v_stop_kmh);
        for z in zones.zones_of(zone_kind) {
            let flag: Vec<bool> = t
                .world
                .iter()
                .zip(&still)
                .map(|(&p, &s)| s && point_in_polygon(p, &z.polygon))
                .collect();
            for (start, end) in runs(&t.frames, &flag, cfg.bridge_frames) {
                let len = end - start + 1;
                if len > need {
                    events.push(ViolationEvent {
                        track_id: t.track_id,
                        kind,
                        zone_id: z.id.clone(),
                        start_frame: start,
                        end_frame: end,
                        evidence: BTreeMap::from([("dwell_s".to_string(), len as f64 / fps)]),
                    });
                }
            }
        }
    }
    sort_events(&mut events);
    events
}

/// Stops longer than the dwell limit inside no-parking zones.
pub fn detect_double_parking(
    tracks: &[TrackMotion],
    zones: &ZoneFile,
    cfg: &ViolationConfig,
    fps: f64,
) -> Vec<ViolationEvent> {
    dwell_events(
        ViolationKind::DoubleParking,
        ZoneKind::NoParking,
        tracks,
        zones,
        cfg,
        fps,
    )
}

/// Stops longer than the dwell limit inside crosswalks.
pub fn detect_crosswalk_obstruction(
    tracks: &[TrackMotion],
    zones: &ZoneFile,
    cfg: &ViolationConfig,
    fps: f64,
) -> Vec<ViolationEvent> {
    dwell_events(
        ViolationKind::CrosswalkObstruction,
        ZoneKind::Crosswalk,
        tracks,
        zones,
        cfg,
        fps,
    )
}

/// Index into `lanes` of the nearest centerline for each point; ties go to
/// the earlier lane.
pub fn lane_indices(points: &[Point], lanes: &[super::Lane]) -> Vec<usize> {
    points
        .iter()
        .map(|&p| {
            let mut best = (f64::INFINITY, 0);
            for (i, l) in lanes.iter().enumerate() {
                let d = polyline_distance(p, &l.centerline);
                if d < best.0 {
                    best = (d, i);
                }
            }
            best.1
        })
        .collect()
}

/// Lane changes inside a U-turn approach zone with less than `d_max_m` left
/// to the stop line. A new lane index must hold for `lane_hold_frames`
/// samples; the change is located at its first sample.
pub fn detect_lane_change_violation(
    tracks: &[TrackMotion],
    zones: &ZoneFile,
    cfg: &ViolationConfig,
) -> Result<Vec<ViolationEvent>, ViolationError> {
    let approaches: Vec<&Zone> = zones.zones_of(ZoneKind::UturnApproach).collect();
    if approaches.is_empty() {
        return Ok(Vec::new());
    }
    if zones.lanes.is_empty() {
        return Err(ViolationError::MissingLaneGeometry);
    }
    let mut events = Vec::new();
    for t in tracks {
        let lanes = lane_indices(&t.world, &zones.lanes);
        let Some(&first) = lanes.first() else {
            continue;
        };
        let mut current = first;
        let mut i = 1;
        while i < lanes.len() {
            if lanes[i] == current {
                i += 1;
                continue;
            }
            let run = lanes[i..].iter().take_while(|&&l| l == lanes[i]).count();
            if run < cfg.lane_hold_frames {
                i += run;
                continue;
            }
            let p = t.world[i];
            for z in &approaches {
                let axis = z.axis.expect("validated layout");
                let d = axis.distance_to_stop(p);
                if point_in_polygon(p, &z.polygon) && (0.0..cfg.d_max_m).contains(&d) {
                    events.push(ViolationEvent {
                        track_id: t.track_id,
                        kind: ViolationKind::IllegalLaneChange,
                        zone_id: z.id.clone(),
                        start_frame: t.frames[i - 1],
                        end_frame: t.frames[i],
                        evidence: BTreeMap::from([
                            ("distance_m".to_string(), d),
                            ("from_lane".to_string(), zones.lanes[current].id as f64),
                            ("to_lane".to_string(), zones.lanes[lanes[i]].id as f64),
                        ]),
                    });
                }
            }
            current = lanes[i];
            i += run;
        }
    }
    sort_events(&mut events);
    Ok(events)
}

/// All three rules, merged in canonical order.
pub fn detect_violations(
    tracks: &[TrackMotion],
    zones: &ZoneFile,
    cfg: &ViolationConfig,
    fps: f64,
) -> Result<Vec<ViolationEvent>, ViolationError> {
    cfg.validate()?;
    let mut all = detect_double_parking(tracks, zones, cfg, fps);
    all.extend(detect_crosswalk_obstruction(tracks, zones, cfg, fps));
    all.extend(detect_lane_change_violation(tracks, zones, cfg)?);
    sort_events(&mut all);
    Ok(all)
}
