use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    nms, response_maps_with, rotate_template, rotated_extent, DetectError, Detection,
    FrameSpectrum, RotatedBox, Template,
};
use crate::imaging::{build_pyramid, Frame, Pyramid};

/// How a peak is turned into a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxMode {
    /// Square aligned with the image axes, sized to the rotated footprint.
    #[default]
    AxisAligned,
    /// Template-sized rectangle at the matched orientation.
    Rotated,
}

/// Search grid and thresholds for template matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Number of pyramid levels (scales) searched.
    pub levels: usize,
    /// Per-level downscaling ratio.
    pub scale_factor: f64,
    /// Template orientations in radians, each within `[-pi/2, pi/2]`.
    pub angles: Vec<f64>,
    pub detect_threshold: f64,
    pub nms_iou: f64,
    pub box_mode: BoxMode,
    /// Place peaks at the vertex of a parabola through the neighbouring scores.
    pub subpixel: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            scale_factor: 0.8,
            angles: angle_grid(45.0, 5.0),
            detect_threshold: 0.7,
            nms_iou: 0.4,
            box_mode: BoxMode::AxisAligned,
            subpixel: true,
        }
    }
}

/// Symmetric grid `-max..=max` (degrees) in `step` increments, as radians.
pub fn angle_grid(max_deg: f64, step_deg: f64) -> Vec<f64> {
    let n = (max_deg / step_deg).round() as i64;
    (-n..=n)
        .map(|i| (i as f64 * step_deg).to_radians())
        .collect()
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: String| Err(DetectError::InvalidConfig(m));
        if self.levels == 0 || self.angles.is_empty() {
            return bad("scale/angle grid is empty".into());
        }
        if !(self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return bad(format!("scale factor {} outside (0, 1)", self.scale_factor));
        }
        if let Some(a) = self
            .angles
            .iter()
            .find(|a| !(a.abs() <= std::f64::consts::FRAC_PI_2))
        {
            return bad(format!("angle {a} rad outside [-pi/2, pi/2]"));
        }
        if !(self.detect_threshold > 0.0 && self.detect_threshold < 1.0) {
            return bad(format!(
                "detection threshold {} outside (0, 1)",
                self.detect_threshold
            ));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou < 1.0) {
            return bad(format!("NMS IoU {} outside (0, 1)", self.nms_iou));
        }
        Ok(())
    }
}

/// A template with its rotated variants precomputed for the angle grid.
#[derive(Debug, Clone)]
struct PreparedTemplate {
    source: Template,
    rotated: Vec<Template>,
}

/// Multi-template, multi-scale, multi-angle NCC detector.
///
/// Templates are matched one after another and the union of their peaks goes
/// through a single NMS pass.
#[derive(Debug, Clone)]
pub struct Detector {
    templates: Vec<PreparedTemplate>,
    config: MatchConfig,
}

impl Detector {
    pub fn new(templates: Vec<Template>, config: MatchConfig) -> Result<Self, DetectError> {
        config.validate()?;
        if templates.is_empty() {
            return Err(DetectError::InvalidConfig("no templates".into()));
        }
        let templates = templates
            .into_iter()
            .map(|source| PreparedTemplate {
                rotated: config
                    .angles
                    .iter()
                    .map(|&a| rotate_template(&source, a))
                    .collect(),
                source,
            })
            .collect();
        Ok(Self { templates, config })
    }

    pub fn config(&self) -> &MatchConfig {
        &self.config
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.iter().map(|t| &t.source)
    }

    /// Raw peaks of every template before suppression, grouped by template
    /// then `(scale_index, angle)`.
    pub fn candidates(&self, frame: &Frame) -> Result<Vec<Detection>, DetectError> {
        let pyramid = build_pyramid(frame, self.config.levels, self.config.scale_factor)?;
        let spectra: Vec<FrameSpectrum> = pyramid
            .levels()
            .par_iter()
            .map(FrameSpectrum::new)
            .collect();
        let mut all = Vec::new();
        for (ti, t) in self.templates.iter().enumerate() {
            all.extend(grid_peaks(
                &pyramid,
                &spectra,
                t,
                ti,
                &self.config,
                frame.timestamp_index(),
            )?);
        }
        Ok(all)
    }

    pub fn detect(&self, frame: &Frame) -> Result<Vec<Detection>, DetectError> {
        Ok(nms(self.candidates(frame)?, self.config.nms_iou))
    }
}

fn grid_peaks(
    pyramid: &Pyramid,
    spectra: &[FrameSpectrum],
    t: &PreparedTemplate,
    template_index: usize,
    cfg: &MatchConfig,
    frame_index: u64,
) -> Result<Vec<Detection>, DetectError> {
    // angles go two per cell, one complex transform each
    let cells: Vec<(usize, usize)> = (0..pyramid.len())
        .flat_map(|k| (0..cfg.angles.len()).step_by(2).map(move |a| (k, a)))
        .collect();
    let (bw, bh) = t.source.body_size();
    // grid cells are independent; collect() keeps (scale, angle) order
    let per_cell: Vec<Vec<Detection>> = cells
        .par_iter()
        .map(|&(k, a0)| {
            let level = pyramid.level(k);
            let angles: Vec<usize> = (a0..(a0 + 2).min(cfg.angles.len()))
                .filter(|&a| {
                    let rot = &t.rotated[a];
                    rot.width() <= level.width() && rot.height() <= level.height()
                })
                .collect();
            let rots: Vec<&Template> = angles.iter().map(|&a| &t.rotated[a]).collect();
            let maps = response_maps_with(&spectra[k], &rots)?;
            let scale = pyramid.scale_of(k);
            let mut out = Vec::new();
            for ((&a, rot), map) in angles.iter().zip(&rots).zip(&maps) {
                let angle = cfg.angles[a];
                let (rcx, rcy) = (
                    (rot.width() as f64 - 1.0) / 2.0,
                    (rot.height() as f64 - 1.0) / 2.0,
                );
                out.extend(
                    map.peaks(cfg.detect_threshold)
                        .into_iter()
                        .map(|(x, y, score)| {
                            let [px, py] = if cfg.subpixel {
                                map.refine(x, y)
                            } else {
                                [x as f64, y as f64]
                            };
                            let c = pyramid.to_level0(k, [px + rcx, py + rcy]);
                            Detection {
                                bbox: peak_box(c, bw, bh, scale, angle, cfg.box_mode),
                                footprint: [bw as f64 / scale, bh as f64 / scale],
                                score,
                                scale_index: k,
                                angle,
                                frame_index,
                                template_index,
                                class_hint: t.source.class_hint(),
                            }
                        }),
                );
            }
            Ok(out)
        })
        .collect::<Result<_, DetectError>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn peak_box(
    c: [f64; 2],
    tw: usize,
    th: usize,
    scale: f64,
    angle: f64,
    mode: BoxMode,
) -> RotatedBox {
    let (w, h) = (tw as f64 / scale, th as f64 / scale);
    match mode {
        BoxMode::Rotated => RotatedBox::new(c[0], c[1], w, h, angle),
        BoxMode::AxisAligned => {
            let (ew, eh) = rotated_extent(w, h, angle);
            let side = ew.max(eh);
            RotatedBox::new(c[0], c[1], side, side, 0.0)
        }
    }
}

/// Matches one template over the configured grid and suppresses overlaps.
pub fn match_template(
    frame: &Frame,
    t: &Template,
    cfg: &MatchConfig,
) -> Result<Vec<Detection>, DetectError> {
    Detector::new(vec![t.clone()], cfg.clone())?.detect(frame)
}
