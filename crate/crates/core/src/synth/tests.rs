use super::*;
use crate::violations::{CoordFrame, Zone, ZoneFile, ZoneKind};
use crate::VehicleClass;

fn base(frames: u64) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(&format!(
        "seed = 11\nwidth = 160\nheight = 80\nfps = 25.0\nframes = {frames}\nnoise = 3\n[background]\ntexture = 4"
    ))
    .unwrap()
}

fn car(id: u64, start: [f64; 2], segments: Vec<Segment>) -> VehicleSpec {
    VehicleSpec {
        id,
        class: VehicleClass::PrivateCar,
        color: None,
        scale: 1.0,
        spawn_frame: 0,
        start,
        heading_deg: None,
        segments,
    }
}

#[test]
fn empty_scene_is_background_only() {
    let mut cfg = base(3);
    cfg.noise = 0;
    cfg.background.texture = 0;
    let out = generate(&cfg).unwrap();
    assert_eq!(out.frames.len(), 3);
    assert!(out.frames.iter().all(|f| f.data().iter().all(|&v| v == 96)));
    assert!(out.truth.boxes.is_empty() && out.truth.violations.is_empty());
}

#[test]
fn constant_velocity_centers_are_exact() {
    let mut cfg = base(20);
    // 0.25 m/px: 12.5 m/s is 2 px per frame
    cfg.vehicles.push(car(
        1,
        [5.0, 10.0],
        vec![Segment {
            frames: 19,
            velocity: [12.5, 0.0],
        }],
    ));
    let out = generate(&cfg).unwrap();
    let gt = &out.truth;
    assert_eq!(gt.boxes.len(), 20);
    for b in &gt.boxes {
        assert_eq!(b.bbox.center(), [20.0 + 2.0 * b.frame_index as f64, 40.0]);
        assert_eq!((b.bbox.w, b.bbox.h, b.bbox.theta), (20.0, 10.0, 0.0));
    }
    assert!(gt.trajectories[0]
        .speed_kmh
        .iter()
        .all(|&s| (s - 45.0).abs() < 1e-9));
}

#[test]
fn speeds_agree_with_positions() {
    let mut cfg = base(60);
    cfg.vehicles.push(car(
        1,
        [5.0, 8.0],
        vec![
            Segment {
                frames: 20,
                velocity: [6.0, 1.0],
            },
            Segment {
                frames: 10,
                velocity: [0.0, 0.0],
            },
            Segment {
                frames: 29,
                velocity: [4.0, -1.5],
            },
        ],
    ));
    let t = &generate(&cfg).unwrap().truth.trajectories[0];
    for k in 0..t.frames.len() - 1 {
        let d = (t.world[k + 1][0] - t.world[k][0]).hypot(t.world[k + 1][1] - t.world[k][1]);
        assert!(
            (d * cfg.fps * 3.6 - t.speed_kmh[k]).abs() < 1e-9,
            "frame {k}"
        );
    }
}

#[test]
fn identical_seeds_identical_bytes() {
    let mut cfg = base(8);
    cfg.vehicles.push(car(
        1,
        [5.0, 10.0],
        vec![Segment {
            frames: 7,
            velocity: [10.0, 2.0],
        }],
    ));
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert!(a
        .frames
        .iter()
        .zip(&b.frames)
        .all(|(x, y)| x.data() == y.data()));
    assert_eq!(a.truth, b.truth);
    cfg.seed += 1;
    let c = generate(&cfg).unwrap();
    assert_ne!(a.frames[0].data(), c.frames[0].data());
}

#[test]
fn leaving_the_frame_is_an_error() {
    let mut cfg = base(30);
    cfg.vehicles.push(car(
        4,
        [5.0, 10.0],
        vec![Segment {
            frames: 29,
            velocity: [30.0, 0.0],
        }],
    ));
    match generate(&cfg) {
        Err(SynthError::OutOfFrame { vehicle: 4, frame }) => assert!(frame > 0 && frame < 30),
        other => panic!("{other:?}"),
    }
}

#[test]
fn occluder_hides_the_vehicle() {
    let mut cfg = base(10);
    cfg.noise = 0;
    cfg.background.texture = 0;
    cfg.vehicles.push(car(
        1,
        [10.0, 10.0],
        vec![Segment {
            frames: 9,
            velocity: [0.0, 0.0],
        }],
    ));
    cfg.occlusions.push(Occlusion {
        vehicle: 1,
        start_frame: 3,
        end_frame: 5,
    });
    let out = generate(&cfg).unwrap();
    assert!(out.frames[4].data().iter().all(|&v| v == 96));
    assert!(out.frames[2].data().iter().any(|&v| v != 96));
    let flags: Vec<bool> = out.truth.boxes.iter().map(|b| b.occluded).collect();
    assert_eq!(flags.iter().filter(|&&f| f).count(), 3);
}

#[test]
fn scripted_stop_in_no_parking_zone() {
    let mut cfg = base(500);
    cfg.layout = ZoneFile {
        zones: vec![Zone {
            id: "np".into(),
            kind: ZoneKind::NoParking,
            frame: CoordFrame::World,
            polygon: vec![[12.0, 5.0], [20.0, 5.0], [20.0, 15.0], [12.0, 15.0]],
            axis: None,
        }],
        ..ZoneFile::default()
    };
    cfg.vehicles.push(car(
        1,
        [5.0, 10.0],
        vec![
            Segment {
                frames: 50,
                velocity: [5.0, 0.0],
            },
            Segment {
                frames: 300,
                velocity: [0.0, 0.0],
            },
            Segment {
                frames: 50,
                velocity: [5.0, 0.0],
            },
        ],
    ));
    // a 9 s stop in the same zone is not a violation
    cfg.vehicles.push(car(
        2,
        [5.0, 12.0],
        vec![
            Segment {
                frames: 50,
                velocity: [5.0, 0.0],
            },
            Segment {
                frames: 225,
                velocity: [0.0, 0.0],
            },
        ],
    ));
    let v = generate(&cfg).unwrap().truth.violations;
    assert_eq!(v.len(), 1);
    assert_eq!(
        (v[0].track_id, v[0].kind, v[0].start_frame, v[0].end_frame),
        (1, crate::ViolationKind::DoubleParking, 50, 350)
    );
}

#[test]
fn written_scene_loads_back() {
    let mut cfg = base(4);
    cfg.vehicles.push(car(
        1,
        [5.0, 10.0],
        vec![Segment {
            frames: 3,
            velocity: [10.0, 0.0],
        }],
    ));
    let out = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scenario(&cfg, &out, dir.path()).unwrap();
    let seq = crate::imaging::FrameSequence::scan(&dir.path().join(FRAMES_DIR)).unwrap();
    let frames = seq.load(cfg.fps).unwrap();
    assert_eq!(frames.len(), 4);
    assert_eq!(frames[2].data(), out.frames[2].data());
    assert!(seq.load_color().unwrap().iter().all(Option::is_some));
    assert_eq!(
        GroundTruth::load(&dir.path().join(GT_FILE)).unwrap(),
        out.truth
    );
    let templates = crate::detect::TemplateSet::load(&dir.path().join(TEMPLATES_FILE)).unwrap();
    assert_eq!(templates.len(), 4);
    assert_eq!(templates[0].body_size(), (20, 10));
    let pairs = crate::geometry::read_correspondences(&dir.path().join(CALIBRATION_FILE)).unwrap();
    let cal = crate::geometry::estimate_homography(&pairs).unwrap();
    assert!(cal.rms_px < 1e-6);
}
