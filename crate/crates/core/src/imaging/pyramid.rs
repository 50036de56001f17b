use super::{
    filter::{gaussian_blur, quantize},
    Frame, ImagingError,
};

/// Gaussian image pyramid with a constant per-level scale factor.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Frame>,
    scale_factor: f64,
}

impl Pyramid {
    pub fn levels(&self) -> &[Frame] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Frame {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    /// Nominal scale of level `k` relative to level 0.
    pub fn scale_of(&self, k: usize) -> f64 {
        self.scale_factor.powi(k as i32)
    }

    /// Maps a level-`k` pixel coordinate to level-0 pixels (pixel centers align).
    pub fn to_level0(&self, k: usize, p: [f64; 2]) -> [f64; 2] {
        let s = self.scale_of(k);
        [(p[0] + 0.5) / s - 0.5, (p[1] + 0.5) / s - 0.5]
    }
}

fn resample_bilinear(src: &Frame, width: usize, height: usize, factor: f64) -> Frame {
    let mut out = Vec::with_capacity(width * height);
    let max_x = src.width() as f64 - 1.0;
    let max_y = src.height() as f64 - 1.0;
    for y in 0..height {
        let sy = ((y as f64 + 0.5) / factor - 0.5).clamp(0.0, max_y);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src.height() - 1);
        let fy = sy - y0 as f64;
        for x in 0..width {
            let sx = ((x as f64 + 0.5) / factor - 0.5).clamp(0.0, max_x);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src.width() - 1);
            let fx = sx - x0 as f64;
            let g = |x: usize, y: usize| src.get(x, y) as f64;
            let top = g(x0, y0) * (1.0 - fx) + g(x1, y0) * fx;
            let bottom = g(x0, y1) * (1.0 - fx) + g(x1, y1) * fx;
            out.push(quantize(top * (1.0 - fy) + bottom * fy));
        }
    }
    Frame::new(width, height, out)
        .expect("sized buffer")
        .with_timing(src.timestamp_index(), src.fps())
        .expect("source fps is valid")
}

/// Builds `levels` pyramid levels; each level is Gaussian-smoothed and then
/// resampled to `floor(previous dims * scale_factor)`.
pub fn build_pyramid(
    frame: &Frame,
    levels: usize,
    scale_factor: f64,
) -> Result<Pyramid, ImagingError> {
    if levels == 0 {
        return Err(ImagingError::InvalidParameter(
            "pyramid needs at least one level".into(),
        ));
    }
    if !(scale_factor > 0.0 && scale_factor < 1.0) {
        return Err(ImagingError::InvalidParameter(format!(
            "scale factor must lie in (0, 1), got {scale_factor}"
        )));
    }
    // anti-aliasing blur matched to the decimation ratio
    let sigma = 0.5 * (1.0 / (scale_factor * scale_factor) - 1.0).sqrt();
    let mut out = vec![frame.clone()];
    for k in 1..levels {
        let prev = &out[k - 1];
        let w = (prev.width() as f64 * scale_factor).floor() as usize;
        let h = (prev.height() as f64 * scale_factor).floor() as usize;
        if w == 0 || h == 0 {
            return Err(ImagingError::DegenerateLevel { level: k });
        }
        let smooth = gaussian_blur(prev, sigma)?;
        out.push(resample_bilinear(&smooth, w, h, scale_factor));
    }
    Ok(Pyramid {
        levels: out,
        scale_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_dimensions() {
        let p = build_pyramid(&Frame::filled(256, 256, 3), 3, 0.5).unwrap();
        let dims: Vec<_> = p.levels().iter().map(|f| (f.width(), f.height())).collect();
        assert_eq!(dims, vec![(256, 256), (128, 128), (64, 64)]);

        let p = build_pyramid(&Frame::filled(100, 37, 3), 4, 0.8).unwrap();
        let dims: Vec<_> = p.levels().iter().map(|f| (f.width(), f.height())).collect();
        assert_eq!(dims, vec![(100, 37), (80, 29), (64, 23), (51, 18)]);
    }

    #[test]
    fn single_level_is_identity() {
        let f = Frame::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let p = build_pyramid(&f, 1, 0.5).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.level(0), &f);
    }

    #[test]
    fn constant_frame_constant_everywhere() {
        let p = build_pyramid(&Frame::filled(64, 48, 201), 4, 0.7).unwrap();
        for level in p.levels() {
            assert!(level.data().iter().all(|&v| v == 201));
        }
    }

    #[test]
    fn degenerate_levels_error() {
        let err = build_pyramid(&Frame::filled(4, 4, 0), 4, 0.5).unwrap_err();
        assert!(matches!(err, ImagingError::DegenerateLevel { level: 3 }));
        assert!(build_pyramid(&Frame::filled(4, 4, 0), 0, 0.5).is_err());
        assert!(build_pyramid(&Frame::filled(4, 4, 0), 2, 1.0).is_err());
    }

    #[test]
    fn level0_coordinate_mapping() {
        let p = build_pyramid(&Frame::filled(64, 64, 0), 2, 0.5).unwrap();
        assert_eq!(p.to_level0(0, [3.0, 4.0]), [3.0, 4.0]);
        // level-1 pixel 0 covers level-0 pixels 0 and 1
        assert_eq!(p.to_level0(1, [0.0, 0.0]), [0.5, 0.5]);
    }
}
