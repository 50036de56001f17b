use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::Homography;
use crate::violations::{ViolationConfig, ZoneFile};
use crate::{Point, VehicleClass};

/// Everything needed to render a scene; the seed fixes every random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frames: u64,
    /// Pixel to ground-plane mapping used to place vehicles.
    #[serde(default = "default_homography")]
    pub homography: Homography,
    #[serde(default)]
    pub background: Background,
    /// Uniform additive noise amplitude in gray levels.
    #[serde(default)]
    pub noise: u8,
    /// Road border around exported detector templates, in pixels.
    #[serde(default = "default_margin")]
    pub template_margin: usize,
    /// Also write color frames next to the grayscale ones.
    #[serde(default = "default_true")]
    pub color: bool,
    #[serde(default, rename = "vehicle")]
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default, rename = "occlusion")]
    pub occlusions: Vec<Occlusion>,
    /// Zones, lanes and gates.
    #[serde(default)]
    pub layout: ZoneFile,
    /// Thresholds applied when listing scripted violations.
    #[serde(default)]
    pub violation: ViolationConfig,
}

fn default_homography() -> Homography {
    Homography::from_rows([[0.25, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 1.0]])
        .expect("invertible")
}

fn default_margin() -> usize {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Background {
    pub level: u8,
    /// Amplitude of a fixed per-pixel road texture.
    pub texture: u8,
    #[serde(rename = "marking")]
    pub markings: Vec<Marking>,
}

impl Default for Background {
    fn default() -> Self {
        Self {
            level: 96,
            texture: 0,
            markings: Vec::new(),
        }
    }
}

/// Painted line in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marking {
    pub from: Point,
    pub to: Point,
    pub width_px: f64,
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: u64,
    pub class: VehicleClass,
    /// Body color for color frames; the class default otherwise.
    #[serde(default)]
    pub color: Option<[u8; 3]>,
    /// Rendered size relative to the class template.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub spawn_frame: u64,
    /// Ground-plane start position in meters.
    pub start: Point,
    /// Image-plane orientation before the first motion, in degrees.
    #[serde(default)]
    pub heading_deg: Option<f64>,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
}

fn one() -> f64 {
    1.0
}

/// Constant ground-plane velocity (m/s) held for `frames` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub frames: u64,
    pub velocity: Point,
}

/// Frames `start_frame..=end_frame` during which a vehicle is hidden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub vehicle: u64,
    pub start_frame: u64,
    pub end_frame: u64,
}

impl VehicleSpec {
    /// Frames the vehicle exists for.
    pub fn lifetime(&self) -> u64 {
        self.segments.iter().map(|s| s.frames).sum::<u64>() + 1
    }

    /// World position `k` frames after spawning, with the velocity of the step
    /// leaving it (`None` past the last segment).
    pub fn state_at(&self, k: u64, fps: f64) -> (Point, Option<Point>) {
        let mut p = self.start;
        let mut left = k;
        for s in &self.segments {
            let steps = left.min(s.frames);
            p[0] += s.velocity[0] * steps as f64 / fps;
            p[1] += s.velocity[1] * steps as f64 / fps;
            left -= steps;
            if left == 0 && steps < s.frames {
                return (p, Some(s.velocity));
            }
        }
        (p, None)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScenario(m));
        if self.width < 8 || self.height < 8 || self.frames == 0 {
            return bad(format!(
                "scene {}x{} with {} frames is too small",
                self.width, self.height, self.frames
            ));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps {} must be positive", self.fps));
        }
        let mut ids: Vec<u64> = self.vehicles.iter().map(|v| v.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("vehicle id {} used twice", w[0]));
        }
        for v in &self.vehicles {
            if !(v.scale > 0.0) {
                return bad(format!(
                    "vehicle {} scale {} must be positive",
                    v.id, v.scale
                ));
            }
        }
        for o in &self.occlusions {
            if !ids.contains(&o.vehicle) || o.end_frame < o.start_frame {
                return bad(format!(
                    "occlusion of vehicle {} over {}..={} is invalid",
                    o.vehicle, o.start_frame, o.end_frame
                ));
            }
        }
        self.layout
            .validate()
            .map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        self.violation
            .validate()
            .map_err(|e| SynthError::InvalidScenario(e.to_string()))
    }
}
