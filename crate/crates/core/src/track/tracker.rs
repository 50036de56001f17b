use serde::{Deserialize, Serialize};

use super::{hungarian, kf_predict, kf_update, KalmanState, NoiseModel, NoiseParams, TrackError};
use crate::classify::{majority_class, VehicleClass};
use crate::detect::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Terminated,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Terminated => "terminated",
        }
    }
}

/// One frame of a track's life.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub frame_index: u64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub status: TrackStatus,
    /// No detection was associated; the position is the prediction.
    pub coasted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: KalmanState,
    pub history: Vec<HistoryEntry>,
    /// Consecutive matched frames, the spawning detection included.
    pub hits: u32,
    /// Consecutive unmatched frames.
    pub misses: u32,
    pub status: TrackStatus,
    labels: [usize; 5],
    ever_confirmed: bool,
}

impl Track {
    /// Majority class of the labels seen so far.
    pub fn class(&self) -> Option<VehicleClass> {
        majority_class(
            VehicleClass::ALL
                .into_iter()
                .flat_map(|c| std::iter::repeat_n(c, self.labels[c.index()])),
        )
    }

    pub fn was_confirmed(&self) -> bool {
        self.ever_confirmed
    }

    pub fn is_live(&self) -> bool {
        self.status != TrackStatus::Terminated
    }

    /// History without trailing coasted frames, which follow the last real
    /// observation and are pure extrapolation.
    pub fn observed_history(&self) -> &[HistoryEntry] {
        let end = self
            .history
            .iter()
            .rposition(|h| !h.coasted)
            .map_or(0, |i| i + 1);
        &self.history[..end]
    }

    fn record(&mut self, frame_index: u64, coasted: bool) {
        self.history.push(HistoryEntry {
            frame_index,
            position: self.state.position(),
            velocity: self.state.velocity(),
            status: self.status,
            coasted,
        });
    }

    fn label(&mut self, class: Option<VehicleClass>) {
        if let Some(c) = class {
            self.labels[c.index()] += 1;
        }
    }
}

/// Association gate and lifecycle constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    #[serde(flatten)]
    pub noise: NoiseParams,
    /// Largest center distance in pixels at which a detection may be matched.
    pub gate: f64,
    pub max_misses: u32,
    pub confirm_hits: u32,
    /// Initial velocity standard deviation of a new track, px/frame.
    pub init_velocity_sigma: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            noise: NoiseParams::default(),
            gate: 60.0,
            max_misses: 10,
            confirm_hits: 3,
            init_velocity_sigma: 5.0,
        }
    }
}

impl TrackerConfig {
    /// Default lifecycle with the gate set to three template widths.
    pub fn for_template_width(width: f64) -> Self {
        Self {
            gate: 3.0 * width,
            ..Self::default()
        }
    }
}

/// Kalman + Hungarian multi-object tracker. Keeps every track it has created,
/// terminated ones included, in creation order.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    model: NoiseModel,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackError> {
        if !(config.gate > 0.0) || config.confirm_hits == 0 || !(config.init_velocity_sigma >= 0.0)
        {
            return Err(TrackError::InvalidConfig(
                "gate and initial velocity sigma must be positive and confirm_hits at least 1"
                    .into(),
            ));
        }
        Ok(Self {
            model: NoiseModel::constant_velocity(config.noise)?,
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    /// Advances every live track by one frame and associates `dets`, all of
    /// which must belong to `frame_index`. `labels[i]` is the class of
    /// `dets[i]` when known.
    pub fn step(
        &mut self,
        frame_index: u64,
        dets: &[Detection],
        labels: &[Option<VehicleClass>],
    ) -> Result<(), TrackError> {
        if self.last_frame.is_some_and(|f| frame_index <= f) {
            return Err(TrackError::FrameOrder {
                previous: self.last_frame.unwrap(),
                got: frame_index,
            });
        }
        if let Some(d) = dets.iter().find(|d| d.frame_index != frame_index) {
            return Err(TrackError::MixedFrames {
                expected: frame_index,
                got: d.frame_index,
            });
        }
        assert_eq!(labels.len(), dets.len(), "one label slot per detection");
        self.last_frame = Some(frame_index);

        let live: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].is_live())
            .collect();
        for &i in &live {
            let t = &mut self.tracks[i];
            t.state = kf_predict(&t.state, &self.model);
        }

        let cost: Vec<Vec<f64>> = live
            .iter()
            .map(|&i| {
                let p = self.tracks[i].state.position();
                dets.iter()
                    .map(|d| {
                        let dist = (d.bbox.cx - p[0]).hypot(d.bbox.cy - p[1]);
                        if dist <= self.config.gate {
                            dist
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        let pairs = hungarian(&cost);

        let mut det_used = vec![false; dets.len()];
        let mut track_matched = vec![None; live.len()];
        for &(r, c) in &pairs {
            track_matched[r] = Some(c);
            det_used[c] = true;
        }

        for (r, &i) in live.iter().enumerate() {
            let cfg = self.config;
            let t = &mut self.tracks[i];
            match track_matched[r] {
                Some(c) => {
                    let d = &dets[c];
                    t.state = kf_update(&t.state, [d.bbox.cx, d.bbox.cy], &self.model)?;
                    t.hits += 1;
                    t.misses = 0;
                    t.label(labels[c]);
                    if t.hits >= cfg.confirm_hits {
                        t.status = TrackStatus::Confirmed;
                        t.ever_confirmed = true;
                    }
                    t.record(frame_index, false);
                }
                None => {
                    t.hits = 0;
                    t.misses += 1;
                    if t.misses > cfg.max_misses {
                        t.status = TrackStatus::Terminated;
                    } else {
                        t.record(frame_index, true);
                    }
                }
            }
        }

        let r = self.config.noise.r_sigma;
        let v = self.config.init_velocity_sigma;
        for (c, d) in dets.iter().enumerate().filter(|(c, _)| !det_used[*c]) {
            let mut t = Track {
                id: self.next_id,
                state: KalmanState::at_rest([d.bbox.cx, d.bbox.cy], r * r, v * v),
                history: Vec::new(),
                hits: 1,
                misses: 0,
                status: TrackStatus::Tentative,
                labels: [0; 5],
                ever_confirmed: false,
            };
            if self.config.confirm_hits <= 1 {
                t.status = TrackStatus::Confirmed;
                t.ever_confirmed = true;
            }
            t.label(labels[c]);
            t.record(frame_index, false);
            self.next_id += 1;
            self.tracks.push(t);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::RotatedBox;

    fn det(frame: u64, x: f64, y: f64) -> Detection {
        Detection::new(RotatedBox::new(x, y, 20.0, 10.0, 0.0), 0.9).at_frame(frame)
    }

    fn run(tracker: &mut Tracker, frame: u64, pts: &[(f64, f64)]) {
        let dets: Vec<_> = pts.iter().map(|&(x, y)| det(frame, x, y)).collect();
        tracker.step(frame, &dets, &vec![None; dets.len()]).unwrap();
    }

    #[test]
    fn confirmation_after_three_hits() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 0..3 {
            run(&mut t, f, &[(100.0 + 2.0 * f as f64, 50.0)]);
            let expect = if f < 2 {
                TrackStatus::Tentative
            } else {
                TrackStatus::Confirmed
            };
            assert_eq!(t.tracks()[0].status, expect, "frame {f}");
        }
        assert_eq!(t.tracks().len(), 1);
    }

    #[test]
    fn no_detections_coast_all_tracks() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 0..5 {
            run(&mut t, f, &[(100.0 + 3.0 * f as f64, 50.0)]);
        }
        let before = t.tracks()[0].state;
        run(&mut t, 5, &[]);
        let tr = &t.tracks()[0];
        assert_eq!(tr.misses, 1);
        assert!(tr.history.last().unwrap().coasted);
        assert!((tr.state.x[0] - (before.x[0] + before.x[2])).abs() < 1e-12);
    }

    #[test]
    fn matched_update_lands_between_prediction_and_measurement() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 0..4 {
            run(&mut t, f, &[(100.0 + 3.0 * f as f64, 50.0)]);
        }
        let predicted = kf_predict(&t.tracks()[0].state, &t.model).position();
        let z = [predicted[0] + 6.0, predicted[1] - 4.0];
        run(&mut t, 4, &[(z[0], z[1])]);
        let post = t.tracks()[0].state.position();
        for k in 0..2 {
            let (lo, hi) = if predicted[k] < z[k] {
                (predicted[k], z[k])
            } else {
                (z[k], predicted[k])
            };
            assert!(post[k] > lo && post[k] < hi);
        }
    }

    #[test]
    fn terminates_after_max_misses() {
        let cfg = TrackerConfig {
            max_misses: 2,
            ..TrackerConfig::default()
        };
        let mut t = Tracker::new(cfg).unwrap();
        for f in 0..3 {
            run(&mut t, f, &[(10.0, 10.0)]);
        }
        run(&mut t, 3, &[]);
        run(&mut t, 4, &[]);
        assert_eq!(t.tracks()[0].misses, 2);
        assert!(t.tracks()[0].is_live());
        run(&mut t, 5, &[]);
        assert_eq!(t.tracks()[0].status, TrackStatus::Terminated);
        // a terminated track is never revived; the detection spawns a new id
        run(&mut t, 6, &[(10.0, 10.0)]);
        assert_eq!(t.tracks().len(), 2);
        assert_eq!(t.tracks()[1].id, 2);
        assert_eq!(t.tracks()[0].history.len(), 5);
        assert_eq!(t.tracks()[0].observed_history().len(), 3);
    }

    #[test]
    fn gate_blocks_far_detections() {
        let mut t = Tracker::new(TrackerConfig::for_template_width(10.0)).unwrap();
        run(&mut t, 0, &[(0.0, 0.0)]);
        run(&mut t, 1, &[(31.0, 0.0)]);
        assert_eq!(t.tracks().len(), 2);
    }

    #[test]
    fn occlusion_is_bridged_without_identity_switch() {
        let cfg = TrackerConfig::default();
        let mut t = Tracker::new(cfg).unwrap();
        let truth = |f: u64| (20.0 + 4.0 * f as f64, 100.0 + 1.5 * f as f64);
        for f in 0..60u64 {
            let hidden = (30..38).contains(&f);
            let p = truth(f);
            run(
                &mut t,
                f,
                if hidden {
                    &[]
                } else {
                    std::slice::from_ref(&p)
                },
            );
            if f == 37 {
                let pos = t.tracks()[0].state.position();
                let q = truth(38);
                assert!(
                    (pos[0] + t.tracks()[0].state.x[2] - q.0)
                        .hypot(pos[1] + t.tracks()[0].state.x[3] - q.1)
                        < cfg.gate
                );
            }
        }
        assert_eq!(t.tracks().len(), 1);
        let frames: Vec<u64> = t.tracks()[0]
            .history
            .iter()
            .map(|h| h.frame_index)
            .collect();
        assert_eq!(frames, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn crossing_tracks_keep_ids_and_ids_never_repeat() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 0..40u64 {
            let x = f as f64 * 3.0;
            run(&mut t, f, &[(x, 100.0), (120.0 - x, 130.0)]);
        }
        assert_eq!(t.tracks().len(), 2);
        let a = &t.tracks()[0];
        assert!(a
            .history
            .iter()
            .all(|h| (h.position[1] - 100.0).abs() < 5.0));
        let mut ids: Vec<u64> = t.tracks().iter().map(|t| t.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 2);
    }

    #[test]
    fn class_is_majority_of_labels() {
        use VehicleClass::*;
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for (f, c) in [Bus, PrivateCar, Bus].into_iter().enumerate() {
            t.step(f as u64, &[det(f as u64, 10.0, 10.0)], &[Some(c)])
                .unwrap();
        }
        assert_eq!(t.tracks()[0].class(), Some(Bus));
    }

    #[test]
    fn rejects_out_of_order_and_mixed_frames() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        run(&mut t, 5, &[]);
        assert!(matches!(
            t.step(5, &[], &[]),
            Err(TrackError::FrameOrder { .. })
        ));
        assert!(matches!(
            t.step(6, &[det(7, 0.0, 0.0)], &[None]),
            Err(TrackError::MixedFrames { .. })
        ));
    }
}
