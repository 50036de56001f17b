use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DetectError;
use crate::classify::VehicleClass;
use crate::imaging::{read_pgm, Frame};

/// Vehicle appearance template with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    width: usize,
    height: usize,
    data: Vec<f64>,
    class_hint: Option<VehicleClass>,
    margin: usize,
}

impl Template {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f64>,
        class_hint: Option<VehicleClass>,
    ) -> Result<Self, DetectError> {
        if width < 3 || height < 3 {
            return Err(DetectError::InvalidTemplate(format!(
                "template must be at least 3x3, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(DetectError::InvalidTemplate(format!(
                "buffer of length {} does not match {width}x{height}",
                data.len()
            )));
        }
        let t = Self {
            width,
            height,
            data,
            class_hint,
            margin: 0,
        };
        if t.variance() <= 0.0 {
            return Err(DetectError::InvalidTemplate(
                "template has zero variance".into(),
            ));
        }
        Ok(t)
    }

    pub fn from_frame(
        frame: &Frame,
        class_hint: Option<VehicleClass>,
    ) -> Result<Self, DetectError> {
        let data = frame.data().iter().map(|&v| v as f64).collect();
        Self::new(frame.width(), frame.height(), data, class_hint)
    }

    pub fn load(path: &Path, class_hint: Option<VehicleClass>) -> Result<Self, DetectError> {
        Self::from_frame(&read_pgm(path)?, class_hint)
    }

    /// Declares a border of `margin` pixels of surrounding road; detections
    /// are sized to the body inside it.
    pub fn with_margin(mut self, margin: usize) -> Result<Self, DetectError> {
        if 2 * margin >= self.width.min(self.height) {
            return Err(DetectError::InvalidTemplate(format!(
                "margin {margin} leaves no body in a {}x{} template",
                self.width, self.height
            )));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    /// Size without the margin.
    pub fn body_size(&self) -> (usize, usize) {
        (self.width - 2 * self.margin, self.height - 2 * self.margin)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn class_hint(&self) -> Option<VehicleClass> {
        self.class_hint
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    /// Quantizes to an 8-bit frame, e.g. for writing to disk.
    pub fn to_frame(&self) -> Frame {
        let data = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        Frame::new(self.width, self.height, data).expect("sized buffer")
    }

    /// Bilinear sample at a real-valued position; `None` outside the
    /// `[0, w-1] x [0, h-1]` sample grid.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        const SNAP: f64 = 1e-9;
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < SNAP {
                r
            } else {
                v
            }
        };
        let (x, y) = (snap(x), snap(y));
        let (mx, my) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(0.0..=mx).contains(&x) || !(0.0..=my).contains(&y) {
            return None;
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

/// Canvas side that contains a `w x h` footprint rotated by `theta`.
pub(crate) fn rotated_extent(w: f64, h: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (w * c.abs() + h * s.abs(), w * s.abs() + h * c.abs())
}

/// Rotates a template by `theta` radians with the matrix
/// `[[cos, -sin], [sin, cos]]` about its center.
///
/// The canvas grows to hold the rotated footprint, plus at most one pixel per
/// side to keep the center on the source pixel grid. Output pixels are
/// bilinearly resampled from the source; pixels whose preimage falls outside
/// the source take the source mean.
pub fn rotate_template(t: &Template, theta: f64) -> Template {
    if theta == 0.0 {
        return t.clone();
    }
    let (ew, eh) = rotated_extent(t.width as f64, t.height as f64, theta);
    // keep the canvas center on the source pixel grid: each side shares the
    // parity of the source side it is closest to in orientation
    let (pw, ph) = if theta.abs() <= std::f64::consts::FRAC_PI_4 {
        (t.width, t.height)
    } else {
        (t.height, t.width)
    };
    let fit = |v: f64, parity: usize| {
        let n = ((v - 1e-9).ceil() as usize).max(1);
        n + (n + parity) % 2
    };
    let (w2, h2) = (fit(ew, pw), fit(eh, ph));
    let (s, c) = theta.sin_cos();
    let (scx, scy) = ((t.width as f64 - 1.0) / 2.0, (t.height as f64 - 1.0) / 2.0);
    let (dcx, dcy) = ((w2 as f64 - 1.0) / 2.0, (h2 as f64 - 1.0) / 2.0);
    let fill = t.mean();
    let mut data = Vec::with_capacity(w2 * h2);
    for y in 0..h2 {
        for x in 0..w2 {
            let (dx, dy) = (x as f64 - dcx, y as f64 - dcy);
            // inverse rotation back into the source frame
            let sx = c * dx + s * dy + scx;
            let sy = -s * dx + c * dy + scy;
            data.push(t.sample(sx, sy).unwrap_or(fill));
        }
    }
    Template {
        width: w2,
        height: h2,
        data,
        class_hint: t.class_hint,
        margin: 0,
    }
}

/// One entry of a template manifest. `path` is relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<VehicleClass>,
    #[serde(default)]
    pub margin: usize,
}

/// TOML list of `[[template]]` entries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSet {
    #[serde(rename = "template", default)]
    pub templates: Vec<TemplateSpec>,
}

impl TemplateSet {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("template set serializes")
    }

    /// Reads the manifest and every PGM it lists.
    pub fn load(manifest: &Path) -> Result<Vec<Template>, DetectError> {
        let err = |reason: String| {
            DetectError::InvalidTemplate(format!("{}: {reason}", manifest.display()))
        };
        let text = std::fs::read_to_string(manifest).map_err(|e| err(e.to_string()))?;
        let set: TemplateSet = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        if set.templates.is_empty() {
            return Err(err("no templates listed".into()));
        }
        let base = manifest.parent().unwrap_or(Path::new("."));
        set.templates
            .iter()
            .map(|s| Template::load(&base.join(&s.path), s.class)?.with_margin(s.margin))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn checkerboard(w: usize, h: usize, cell: usize, lo: f64, hi: f64) -> Template {
        let data = (0..w * h)
            .map(|i| {
                if ((i % w) / cell + (i / w) / cell).is_multiple_of(2) {
                    lo
                } else {
                    hi
                }
            })
            .collect();
        Template::new(w, h, data, None).unwrap()
    }

    #[test]
    fn rejects_constant_and_tiny() {
        assert!(Template::new(4, 4, vec![5.0; 16], None).is_err());
        assert!(Template::new(2, 4, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], None).is_err());
        assert!(Template::new(3, 3, vec![0.0; 8], None).is_err());
    }

    #[test]
    fn zero_rotation_is_identity() {
        let t = checkerboard(7, 5, 2, 10.0, 200.0);
        assert_eq!(rotate_template(&t, 0.0), t);
    }

    #[test]
    fn quarter_turn_transposes() {
        let data: Vec<f64> = (0..5 * 3).map(|v| v as f64).collect();
        let t = Template::new(5, 3, data, None).unwrap();
        let r = rotate_template(&t, FRAC_PI_2);
        assert_eq!((r.width(), r.height()), (3, 5));
        // destination (x', y') = R(theta) (x, y) about the centers
        for y in 0..3 {
            for x in 0..5 {
                let (dx, dy) = (x as f64 - 2.0, y as f64 - 1.0);
                let (xr, yr) = (-dy + 1.0, dx + 2.0);
                let got = r.get(xr.round() as usize, yr.round() as usize);
                assert!((got - t.get(x, y)).abs() < 1e-9, "({x},{y})");
            }
        }
    }

    fn round_trip_worst(
        t: &Template,
        deg: f64,
        margin: usize,
        skip: impl Fn(usize, usize) -> bool,
    ) -> f64 {
        let th = deg.to_radians();
        let back = rotate_template(&rotate_template(t, th), -th);
        let ox = (back.width() - t.width()) / 2;
        let oy = (back.height() - t.height()) / 2;
        let mut worst: f64 = 0.0;
        for y in margin..t.height() - margin {
            for x in margin..t.width() - margin {
                if !skip(x, y) {
                    worst = worst.max((back.get(x + ox, y + oy) - t.get(x, y)).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn round_trip_within_two_levels_on_low_contrast_checkerboard() {
        // bilinear smoothing along cell edges compounds over the two passes;
        // the worst pixel moves by just under 0.4 of the cell contrast
        let t = checkerboard(32, 32, 8, 100.0, 105.0);
        for deg in [5.0, 15.0, 30.0, 45.0] {
            let worst = round_trip_worst(&t, deg, 4, |_, _| false);
            assert!(worst <= 2.0, "{deg} deg: worst {worst}");
        }
    }

    #[test]
    fn round_trip_exact_away_from_cell_edges() {
        let t = checkerboard(32, 32, 8, 0.0, 255.0);
        let near_edge = |x: usize, y: usize| {
            let d = |v: usize| (v % 8).min(8 - v % 8);
            d(x) < 3 || d(y) < 3
        };
        for deg in [5.0, 15.0, 30.0, 45.0] {
            let worst = round_trip_worst(&t, deg, 4, near_edge);
            assert!(worst < 1e-6, "{deg} deg: worst {worst}");
        }
    }

    #[test]
    fn rotated_canvas_contains_footprint() {
        let t = checkerboard(20, 10, 3, 0.0, 255.0);
        for deg in [10.0f64, 30.0, 60.0] {
            let r = rotate_template(&t, deg.to_radians());
            let (ew, eh) = rotated_extent(20.0, 10.0, deg.to_radians());
            assert!(r.width() as f64 >= ew && r.width() as f64 <= ew.ceil() + 1.0);
            assert!(r.height() as f64 >= eh && r.height() as f64 <= eh.ceil() + 1.0);
            let (pw, ph) = if deg <= 45.0 { (20, 10) } else { (10, 20) };
            assert_eq!((r.width() % 2, r.height() % 2), (pw % 2, ph % 2));
        }
    }
}
