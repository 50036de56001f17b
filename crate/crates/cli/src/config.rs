use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skytraffic_core::analytics::CongestionConfig;
use skytraffic_core::detect::{MatchConfig, TemplateSet};
use skytraffic_core::geometry::DEFAULT_SPEED_WINDOW;
use skytraffic_core::imaging::Denoise;
use skytraffic_core::track::TrackerConfig;
use skytraffic_core::violations::ViolationConfig;

use crate::CliError;

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SKYTRAFFIC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Classify,
    Track,
    Violations,
    Analytics,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Detect,
        Stage::Classify,
        Stage::Track,
        Stage::Violations,
        Stage::Analytics,
    ];
}

/// Where frames (or precomputed detections) come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Directory of `frame_%06d.pgm` files, with optional `.ppm` color siblings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    /// Scenario rendered in memory instead of reading frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    /// Detections CSV used instead of running the detector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    /// Required with `frames` or `detections`; a scenario carries its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denoise: Option<Denoise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clahe: Option<ClaheConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaheConfig {
    /// `[rows, cols]`
    pub tiles: [usize; 2],
    pub clip_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Pixel distance under which a track point matches a ground-truth center.
    pub match_dist_px: f64,
    /// IoU for scoring detections against ground truth.
    pub detection_iou: f64,
    /// Frames per speed window.
    pub speed_window: u64,
    pub congestion: CongestionConfig,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            match_dist_px: 10.0,
            detection_iou: 0.5,
            speed_window: DEFAULT_SPEED_WINDOW,
            congestion: CongestionConfig::default(),
        }
    }
}

fn all_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Full pipeline description. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Replaces the scenario seed when the input is a scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "all_stages")]
    pub stages: Vec<Stage>,
    pub input: InputConfig,
    /// Template manifest; a scenario input supplies its own templates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    /// `px py wx wy` correspondences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zones: Option<PathBuf>,
    /// Ground truth for scoring; a scenario input supplies its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub detect: MatchConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub violations: ViolationConfig,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
}

impl PipelineConfig {
    /// Parses, resolves relative paths and checks that every referenced file
    /// exists. `OUTPUT_DIR_ENV` overrides the output directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|_| CliError::MissingFile(path.to_path_buf()))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.resolve(&base);
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.frames);
        fix(&mut self.input.scenario);
        fix(&mut self.input.detections);
        fix(&mut self.templates);
        fix(&mut self.calibration);
        fix(&mut self.rules);
        fix(&mut self.zones);
        fix(&mut self.ground_truth);
        self.output_dir = base.join(&self.output_dir);
    }

    pub fn enabled(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }

    pub fn validate(&self, path: &Path) -> Result<(), CliError> {
        let bad = |reason: String| {
            Err(CliError::Config {
                path: path.to_path_buf(),
                reason,
            })
        };
        let i = &self.input;
        let sources = [&i.frames, &i.scenario, &i.detections]
            .iter()
            .filter(|p| p.is_some())
            .count();
        if sources != 1 {
            return bad("input needs exactly one of frames, scenario, detections".into());
        }
        if i.scenario.is_none() && !i.fps.is_some_and(|f| f > 0.0) {
            return bad("input.fps must be given and positive".into());
        }
        if i.scenario.is_none()
            && self.enabled(Stage::Detect)
            && i.detections.is_none()
            && self.templates.is_none()
        {
            return bad("detection needs a templates manifest".into());
        }
        for p in [
            &i.frames,
            &i.scenario,
            &i.detections,
            &self.templates,
            &self.calibration,
            &self.rules,
            &self.zones,
            &self.ground_truth,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(CliError::MissingFile(p.clone()));
            }
        }
        if let Some(manifest) = &self.templates {
            let text = std::fs::read_to_string(manifest)
                .map_err(|_| CliError::MissingFile(manifest.clone()))?;
            let set: TemplateSet = toml::from_str(&text).map_err(|e| CliError::Config {
                path: manifest.clone(),
                reason: e.message().to_string(),
            })?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            if let Some(missing) = set
                .templates
                .iter()
                .map(|t| base.join(&t.path))
                .find(|p| !p.exists())
            {
                return Err(CliError::MissingFile(missing));
            }
        }
        self.detect.validate().map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        self.violations.validate().map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let a = &self.analytics;
        if !(a.match_dist_px > 0.0)
            || !(a.detection_iou > 0.0 && a.detection_iou <= 1.0)
            || a.speed_window == 0
        {
            return bad(
                "analytics: match_dist_px > 0, detection_iou in (0, 1], speed_window >= 1".into(),
            );
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
