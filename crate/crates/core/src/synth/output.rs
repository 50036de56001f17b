use std::path::{Path, PathBuf};

use super::appearance::{detector_template, TEMPLATE_CLASSES};
use super::{ScenarioConfig, SynthError, SynthOutput};
use crate::detect::{TemplateSet, TemplateSpec};
use crate::geometry::{write_correspondences, Correspondence};
use crate::imaging::{write_pgm, write_ppm, FrameSequence};

/// Files written by [`write_scenario`], relative to its output directory.
pub const FRAMES_DIR: &str = "frames";
pub const GT_FILE: &str = "gt.json";
pub const ZONES_FILE: &str = "zones.toml";
pub const CALIBRATION_FILE: &str = "calibration.txt";
pub const TEMPLATES_FILE: &str = "templates/templates.toml";

fn io(path: &Path, e: impl std::fmt::Display) -> SynthError {
    SynthError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Nine pixel/ground pairs on a 3x3 grid spanning the frame.
pub fn calibration_points(cfg: &ScenarioConfig) -> Result<Vec<Correspondence>, SynthError> {
    let (w, h) = ((cfg.width - 1) as f64, (cfg.height - 1) as f64);
    let mut out = Vec::new();
    for fy in [0.0, 0.5, 1.0] {
        for fx in [0.0, 0.5, 1.0] {
            let pixel = [fx * w, fy * h];
            let world = cfg
                .homography
                .project(pixel)
                .map_err(|e| SynthError::InvalidScenario(format!("homography: {e}")))?;
            out.push(Correspondence { pixel, world });
        }
    }
    Ok(out)
}

/// Frames, ground truth, layout, calibration pairs and detector templates.
pub fn write_scenario(
    cfg: &ScenarioConfig,
    out: &SynthOutput,
    dir: &Path,
) -> Result<(), SynthError> {
    let frames_dir = dir.join(FRAMES_DIR);
    let tdir = dir.join("templates");
    for d in [&frames_dir, &tdir] {
        std::fs::create_dir_all(d).map_err(|e| io(d, e))?;
    }
    for (i, f) in out.frames.iter().enumerate() {
        write_pgm(&frames_dir.join(FrameSequence::file_name(i as u64)), f)?;
    }
    if let Some(color) = &out.color {
        for (i, f) in color.iter().enumerate() {
            write_ppm(
                &frames_dir.join(FrameSequence::color_file_name(i as u64)),
                f,
            )?;
        }
    }
    out.truth.save(&dir.join(GT_FILE))?;
    let zones = dir.join(ZONES_FILE);
    std::fs::write(&zones, cfg.layout.to_toml_string()).map_err(|e| io(&zones, e))?;
    write_correspondences(&dir.join(CALIBRATION_FILE), &calibration_points(cfg)?)
        .map_err(|e| io(&dir.join(CALIBRATION_FILE), e))?;

    let mut set = TemplateSet::default();
    for class in TEMPLATE_CLASSES {
        let name = format!("{}.pgm", class.as_str());
        let t = detector_template(class, cfg.template_margin, cfg.background.level);
        write_pgm(&tdir.join(&name), &t.to_frame())?;
        set.templates.push(TemplateSpec {
            path: PathBuf::from(name),
            class: Some(class),
            margin: cfg.template_margin,
        });
    }
    let manifest = dir.join(TEMPLATES_FILE);
    std::fs::write(&manifest, set.to_toml_string()).map_err(|e| io(&manifest, e))
}
