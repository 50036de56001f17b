use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use skytraffic_core::analytics::{
    class_correlation, congestion_clusters, count_crossings, evaluate_detections, evaluate_mot,
    heatmap_grid, od_matrix, write_congestion_jsonl, write_correlation_csv, write_counts_csv,
    write_heatmap_csv, write_json, write_od_csv, GtObject, PredObject, TrackPath,
};
use skytraffic_core::classify::{body_patch, classify, ClassRules};
use skytraffic_core::detect::{
    read_detections_csv, write_detections_csv, Detector, Template, TemplateSet,
};
use skytraffic_core::geometry::{
    estimate_homography, read_correspondences, Calibration, Correspondence,
};
use skytraffic_core::imaging::{clahe, denoise, Frame, FrameSequence, RgbFrame};
use skytraffic_core::synth::{
    calibration_points, detector_template, generate, write_scenario, GroundTruth, ScenarioConfig,
    TEMPLATE_CLASSES,
};
use skytraffic_core::track::{read_tracks_csv, write_tracks_csv, TrackRow, Tracker};
use skytraffic_core::violations::{detect_violations, write_events_jsonl, TrackMotion, ZoneFile};
use skytraffic_core::{Detection, Homography, Point, VehicleClass};

use crate::{CliError, Manifest, PipelineConfig, Stage};

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

struct Inputs {
    fps: f64,
    frames: Vec<Frame>,
    color: Vec<Option<RgbFrame>>,
    detections: Option<Vec<Detection>>,
    templates: Vec<Template>,
    correspondences: Option<Vec<Correspondence>>,
    layout: Option<ZoneFile>,
    truth: Option<GroundTruth>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, CliError> {
    let mut inputs = Inputs {
        fps: cfg.input.fps.unwrap_or(0.0),
        frames: Vec::new(),
        color: Vec::new(),
        detections: None,
        templates: Vec::new(),
        correspondences: None,
        layout: None,
        truth: None,
    };
    if let Some(path) = &cfg.input.scenario {
        let mut sc = ScenarioConfig::load(path).map_err(|e| CliError::stage("synth", e))?;
        if let Some(seed) = cfg.seed {
            sc.seed = seed;
        }
        let out = generate(&sc).map_err(|e| CliError::stage("synth", e))?;
        inputs.fps = sc.fps;
        inputs.color = match out.color {
            Some(c) => c.into_iter().map(Some).collect(),
            None => vec![None; out.frames.len()],
        };
        inputs.frames = out.frames;
        inputs.templates = TEMPLATE_CLASSES
            .iter()
            .map(|&c| detector_template(c, sc.template_margin, sc.background.level))
            .collect();
        inputs.correspondences =
            Some(calibration_points(&sc).map_err(|e| CliError::stage("synth", e))?);
        inputs.layout = Some(sc.layout.clone());
        inputs.truth = Some(out.truth);
    }
    if let Some(dir) = &cfg.input.frames {
        let seq = FrameSequence::scan(dir).map_err(|e| CliError::stage("input", e))?;
        if seq.is_empty() {
            return Err(CliError::stage(
                "input",
                format!("no frame_%06d.pgm files in {}", dir.display()),
            ));
        }
        inputs.frames = seq
            .load(inputs.fps)
            .map_err(|e| CliError::stage("input", e))?;
        inputs.color = seq.load_color().map_err(|e| CliError::stage("input", e))?;
    }
    if let Some(path) = &cfg.input.detections {
        inputs.detections =
            Some(read_detections_csv(path).map_err(|e| CliError::stage("input", e))?);
    }
    if let Some(path) = &cfg.templates {
        inputs.templates = TemplateSet::load(path).map_err(|e| CliError::stage("detect", e))?;
    }
    if let Some(path) = &cfg.calibration {
        inputs.correspondences =
            Some(read_correspondences(path).map_err(|e| CliError::stage("geometry", e))?);
    }
    if let Some(path) = &cfg.zones {
        inputs.layout = Some(ZoneFile::load(path).map_err(|e| CliError::stage("violations", e))?);
    }
    if let Some(path) = &cfg.ground_truth {
        inputs.truth = Some(GroundTruth::load(path).map_err(|e| CliError::stage("evaluate", e))?);
    }
    Ok(inputs)
}

fn preprocess(cfg: &PipelineConfig, frame: &Frame) -> Result<Frame, CliError> {
    let mut f = frame.clone();
    if let Some(d) = cfg.preprocess.denoise {
        f = denoise(&f, d).map_err(|e| CliError::stage("preprocess", e))?;
    }
    if let Some(c) = cfg.preprocess.clahe {
        f = clahe(&f, (c.tiles[0], c.tiles[1]), c.clip_limit)
            .map_err(|e| CliError::stage("preprocess", e))?;
    }
    f.with_timing(frame.timestamp_index(), frame.fps())
        .map_err(|e| CliError::stage("preprocess", e))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Runs every enabled stage and writes the outputs plus `manifest.json`.
/// `config_text` is the config file as read; it is hashed into the manifest.
pub fn run(cfg: &PipelineConfig, config_text: &str) -> Result<RunSummary, CliError> {
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut manifest = Manifest::new(config_text, cfg.seed);
    manifest.stages = Stage::ALL
        .iter()
        .filter(|s| cfg.enabled(**s))
        .map(|s| {
            serde_json::to_value(s)
                .expect("stage")
                .as_str()
                .expect("string")
                .to_string()
        })
        .collect();
    let inputs = load_inputs(cfg)?;
    manifest
        .counts
        .insert("frames".into(), inputs.frames.len() as u64);

    // detect
    let mut detections: Vec<Detection> = match (&inputs.detections, cfg.enabled(Stage::Detect)) {
        (Some(d), _) => d.clone(),
        (None, true) if !inputs.frames.is_empty() => {
            let detector = Detector::new(inputs.templates.clone(), cfg.detect.clone())
                .map_err(|e| CliError::stage("detect", e))?;
            let mut all = Vec::new();
            for f in &inputs.frames {
                let pre = preprocess(cfg, f)?;
                all.extend(
                    detector
                        .detect(&pre)
                        .map_err(|e| CliError::stage("detect", e))?,
                );
            }
            all
        }
        _ => Vec::new(),
    };
    detections.sort_by_key(|d| d.frame_index);
    manifest
        .counts
        .insert("detections".into(), detections.len() as u64);
    if inputs.detections.is_none() && cfg.enabled(Stage::Detect) {
        let p = out.join("detections.csv");
        write_detections_csv(&p, &detections).map_err(|e| io_err(&p, e))?;
        manifest.record(&out, "detections.csv")?;
    }

    // classify
    let rules = match &cfg.rules {
        Some(p) => ClassRules::load(p).map_err(|e| CliError::stage("classify", e))?,
        None => ClassRules::default(),
    };
    let first_frame = inputs
        .frames
        .first()
        .map(|f| f.timestamp_index())
        .unwrap_or(0);
    let labels: Vec<Option<VehicleClass>> = detections
        .iter()
        .map(|d| {
            if !cfg.enabled(Stage::Classify) {
                return d.class_hint;
            }
            let rgb = inputs
                .color
                .get((d.frame_index - first_frame) as usize)
                .and_then(Option::as_ref);
            let patch = rgb.and_then(|c| body_patch(d, c));
            Some(classify(d, patch.as_ref(), &rules))
        })
        .collect();

    let truth_objects: Option<Vec<GtObject>> = inputs.truth.as_ref().map(GroundTruth::mot_objects);
    if let Some(gt) = &truth_objects {
        if cfg.enabled(Stage::Detect) {
            let boxes: Vec<_> = detections.iter().map(|d| (d.frame_index, d.bbox)).collect();
            let report = evaluate_detections(gt, &boxes, cfg.analytics.detection_iou)
                .map_err(|e| CliError::stage("evaluate", e))?;
            let p = out.join("detection_report.json");
            write_json(&p, &report).map_err(|e| io_err(&p, e))?;
            manifest.record(&out, "detection_report.json")?;
        }
    }

    if !cfg.enabled(Stage::Track) {
        return finish(out, manifest);
    }

    // track
    let frame_indices: Vec<u64> = if inputs.frames.is_empty() {
        match (detections.first(), detections.last()) {
            (Some(a), Some(b)) => (a.frame_index..=b.frame_index).collect(),
            _ => Vec::new(),
        }
    } else {
        inputs.frames.iter().map(Frame::timestamp_index).collect()
    };
    let mut tracker = Tracker::new(cfg.tracker).map_err(|e| CliError::stage("track", e))?;
    let mut cursor = 0;
    for f in frame_indices.iter().copied() {
        let start = cursor;
        while cursor < detections.len() && detections[cursor].frame_index == f {
            cursor += 1;
        }
        tracker
            .step(f, &detections[start..cursor], &labels[start..cursor])
            .map_err(|e| CliError::stage("track", e))?;
    }
    let rows = TrackRow::from_tracks(tracker.tracks());
    let p = out.join("tracks.csv");
    write_tracks_csv(&p, &rows).map_err(|e| io_err(&p, e))?;
    manifest.record(&out, "tracks.csv")?;
    let paths = group_paths(&rows);
    manifest
        .counts
        .insert("confirmed_tracks".into(), paths.len() as u64);

    if let Some(gt) = &truth_objects {
        let pred: Vec<PredObject> = rows
            .iter()
            .map(|r| PredObject {
                frame_index: r.frame_index,
                id: r.track_id,
                center: [r.cx, r.cy],
            })
            .collect();
        let report = evaluate_mot(gt, &pred, cfg.analytics.match_dist_px)
            .map_err(|e| CliError::stage("evaluate", e))?;
        let p = out.join("mot_report.json");
        write_json(&p, &report).map_err(|e| io_err(&p, e))?;
        manifest.record(&out, "mot_report.json")?;
    }

    // geometry
    let calibration: Option<Calibration> = match &inputs.correspondences {
        Some(pairs) => {
            Some(estimate_homography(pairs).map_err(|e| CliError::stage("geometry", e))?)
        }
        None => {
            manifest
                .skipped
                .insert("speeds.csv".into(), "no calibration".into());
            None
        }
    };
    let h = calibration
        .as_ref()
        .map_or(Homography::identity(), |c| c.homography);
    let mut motions = Vec::new();
    if let Some(c) = &calibration {
        let p = out.join("calibration.json");
        write_json(&p, c).map_err(|e| io_err(&p, e))?;
        manifest.record(&out, "calibration.json")?;
        for (id, _, pts) in &paths {
            motions.push(
                TrackMotion::from_pixels(
                    *id,
                    pts,
                    &c.homography,
                    inputs.fps,
                    cfg.analytics.speed_window,
                )
                .map_err(|e| CliError::stage("geometry", e))?,
            );
        }
        let p = out.join("speeds.csv");
        write_speeds(&p, &motions)?;
        manifest.record(&out, "speeds.csv")?;
    }

    // violations
    let world_layout = match &inputs.layout {
        Some(l) => Some(
            l.to_world(&h)
                .map_err(|e| CliError::stage("violations", e))?,
        ),
        None => None,
    };
    if cfg.enabled(Stage::Violations) {
        match (&world_layout, &calibration) {
            (Some(layout), Some(_)) => {
                let events = detect_violations(&motions, layout, &cfg.violations, inputs.fps)
                    .map_err(|e| CliError::stage("violations", e))?;
                manifest
                    .counts
                    .insert("violations".into(), events.len() as u64);
                let p = out.join("violations.jsonl");
                write_events_jsonl(&p, &events).map_err(|e| io_err(&p, e))?;
                manifest.record(&out, "violations.jsonl")?;
            }
            _ => {
                manifest.skipped.insert(
                    "violations.jsonl".into(),
                    "needs both a zone file and a calibration".into(),
                );
            }
        }
    }

    // analytics
    if cfg.enabled(Stage::Analytics) {
        let world_paths: Vec<TrackPath> = paths
            .iter()
            .map(|(id, class, pts)| {
                Ok(TrackPath {
                    track_id: *id,
                    class: *class,
                    points: pts
                        .iter()
                        .map(|&(f, p)| Ok((f, h.project(p)?)))
                        .collect::<Result<_, skytraffic_core::geometry::GeometryError>>()?,
                })
            })
            .collect::<Result<_, skytraffic_core::geometry::GeometryError>>()
            .map_err(|e| CliError::stage("analytics", e))?;
        let gates = world_layout
            .as_ref()
            .map(|l| l.gates.clone())
            .unwrap_or_default();
        let counts = count_crossings(&world_paths, &gates);
        let od = od_matrix(&world_paths, &gates);
        manifest
            .counts
            .insert("gate_crossings".into(), counts.total());
        manifest.counts.insert("od_trips".into(), od.total());
        manifest.counts.insert(
            "od_excluded_single_crossing".into(),
            od.excluded_single_crossing,
        );
        for (name, r) in [
            (
                "counts.csv",
                write_counts_csv(&out.join("counts.csv"), &counts),
            ),
            ("od.csv", write_od_csv(&out.join("od.csv"), &od)),
            (
                "heatmap.csv",
                write_heatmap_csv(
                    &out.join("heatmap.csv"),
                    &counts.gates,
                    &heatmap_grid(&counts),
                ),
            ),
        ] {
            r.map_err(|e| io_err(&out.join(name), e))?;
            manifest.record(&out, name)?;
        }
        match class_correlation(&counts) {
            Ok(m) => {
                let p = out.join("correlation.csv");
                write_correlation_csv(&p, &m).map_err(|e| io_err(&p, e))?;
                manifest.record(&out, "correlation.csv")?;
            }
            Err(e) => {
                manifest
                    .skipped
                    .insert("correlation.csv".into(), e.to_string());
            }
        }
        let mut per_frame: BTreeMap<u64, Vec<Point>> =
            frame_indices.iter().map(|&f| (f, Vec::new())).collect();
        for p in &world_paths {
            for &(f, w) in &p.points {
                per_frame.entry(f).or_default().push(w);
            }
        }
        let per_frame: Vec<(u64, Vec<Point>)> = per_frame.into_iter().collect();
        let regions = congestion_clusters(&per_frame, &cfg.analytics.congestion, inputs.fps)
            .map_err(|e| CliError::stage("analytics", e))?;
        manifest
            .counts
            .insert("congestion_regions".into(), regions.len() as u64);
        let p = out.join("congestion.jsonl");
        write_congestion_jsonl(&p, &regions).map_err(|e| io_err(&p, e))?;
        manifest.record(&out, "congestion.jsonl")?;
    }
    finish(out, manifest)
}

fn finish(out: PathBuf, manifest: Manifest) -> Result<RunSummary, CliError> {
    manifest.write(&out.join("manifest.json"))?;
    Ok(RunSummary {
        output_dir: out,
        manifest,
    })
}

/// Per confirmed track: id, class and pixel positions in frame order.
type PixelPath = (u64, VehicleClass, Vec<(u64, Point)>);

fn group_paths(rows: &[TrackRow]) -> Vec<PixelPath> {
    let mut out: Vec<PixelPath> = Vec::new();
    for r in rows {
        match out.last_mut() {
            Some((id, _, pts)) if *id == r.track_id => pts.push((r.frame_index, [r.cx, r.cy])),
            _ => out.push((
                r.track_id,
                r.class.unwrap_or(skytraffic_core::classify::FALLBACK_CLASS),
                vec![(r.frame_index, [r.cx, r.cy])],
            )),
        }
    }
    out
}

fn write_speeds(path: &Path, motions: &[TrackMotion]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["track_id", "frame_index", "speed_kmh"])
        .map_err(|e| io_err(path, e))?;
    for m in motions {
        for s in &m.speeds {
            w.write_record([
                m.track_id.to_string(),
                s.end_frame.to_string(),
                s.speed_kmh.to_string(),
            ])
            .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Scores `tracks.csv` in the output directory against a ground-truth file
/// and writes `mot_report.json` next to it.
pub fn evaluate(cfg: &PipelineConfig, gt_path: &Path) -> Result<PathBuf, CliError> {
    if !gt_path.exists() {
        return Err(CliError::MissingFile(gt_path.to_path_buf()));
    }
    let tracks_path = cfg.output_dir.join("tracks.csv");
    if !tracks_path.exists() {
        return Err(CliError::MissingFile(tracks_path));
    }
    let truth = GroundTruth::load(gt_path).map_err(|e| CliError::stage("evaluate", e))?;
    let rows = read_tracks_csv(&tracks_path).map_err(|e| CliError::stage("evaluate", e))?;
    let pred: Vec<PredObject> = rows
        .iter()
        .map(|r| PredObject {
            frame_index: r.frame_index,
            id: r.track_id,
            center: [r.cx, r.cy],
        })
        .collect();
    let report = evaluate_mot(&truth.mot_objects(), &pred, cfg.analytics.match_dist_px)
        .map_err(|e| CliError::stage("evaluate", e))?;
    let p = cfg.output_dir.join("mot_report.json");
    write_json(&p, &report).map_err(|e| io_err(&p, e))?;
    Ok(p)
}

/// Renders a scenario file to a frame directory with ground truth.
pub fn synth(scenario: &Path, out: &Path) -> Result<(), CliError> {
    if !scenario.exists() {
        return Err(CliError::MissingFile(scenario.to_path_buf()));
    }
    let sc = ScenarioConfig::load(scenario).map_err(|e| CliError::Config {
        path: scenario.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rendered = generate(&sc).map_err(|e| CliError::stage("synth", e))?;
    write_scenario(&sc, &rendered, out).map_err(|e| CliError::stage("synth", e))
}
