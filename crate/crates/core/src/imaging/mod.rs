//! Frames and the preprocessing chain that feeds detection.

mod clahe;
mod filter;
mod pnm;
mod pyramid;
mod threshold;

pub use clahe::{clahe, equalize_histogram};
pub use filter::{convolve_separable, denoise, gaussian_kernel, Denoise};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_ppm, FrameSequence};
pub use pyramid::{build_pyramid, Pyramid};
pub use threshold::{adaptive_threshold, binarize, otsu_threshold};

use thiserror::Error;

/// Frame rate assumed when a frame is built without explicit timing.
pub const DEFAULT_FPS: f64 = 25.0;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("buffer of length {len} does not match {width}x{height}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frame has a single intensity; no threshold separates two classes")]
    ConstantFrame,
    #[error("tile grid must have at least one row and one column")]
    ZeroSizedTile,
    #[error("pyramid level {level} would have zero width or height")]
    DegenerateLevel { level: usize },
    #[error("malformed image file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Single-channel 8-bit intensity raster stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
    timestamp_index: u64,
    fps: f64,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if data.len() != width * height {
            return Err(ImagingError::DimensionMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            timestamp_index: 0,
            fps: DEFAULT_FPS,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
            timestamp_index: 0,
            fps: DEFAULT_FPS,
        }
    }

    /// Attaches a frame number and frame rate.
    pub fn with_timing(mut self, timestamp_index: u64, fps: f64) -> Result<Self, ImagingError> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(ImagingError::InvalidParameter(format!(
                "fps must be positive, got {fps}"
            )));
        }
        self.timestamp_index = timestamp_index;
        self.fps = fps;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn timestamp_index(&self) -> u64 {
        self.timestamp_index
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies timing metadata from another frame; used by filters that keep
    /// dimensions.
    pub(crate) fn with_pixels_of(&self, data: Vec<u8>) -> Frame {
        debug_assert_eq!(data.len(), self.data.len());
        Frame {
            width: self.width,
            height: self.height,
            data,
            timestamp_index: self.timestamp_index,
            fps: self.fps,
        }
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

/// Three-channel 8-bit raster, row-major, RGB order.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self, ImagingError> {
        if data.len() != width * height {
            return Err(ImagingError::DimensionMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[u8; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    /// Extracts the axis-aligned window `[x0, x0+w) x [y0, y0+h)` clipped to the
    /// raster. Returns `None` when the clipped window is empty.
    pub fn crop(&self, x0: isize, y0: isize, w: usize, h: usize) -> Option<RgbFrame> {
        let xa = x0.max(0) as usize;
        let ya = y0.max(0) as usize;
        let xb = ((x0 + w as isize).max(0) as usize).min(self.width);
        let yb = ((y0 + h as isize).max(0) as usize).min(self.height);
        if xa >= xb || ya >= yb {
            return None;
        }
        let mut data = Vec::with_capacity((xb - xa) * (yb - ya));
        for y in ya..yb {
            data.extend_from_slice(&self.data[y * self.width + xa..y * self.width + xb]);
        }
        Some(RgbFrame {
            width: xb - xa,
            height: yb - ya,
            data,
        })
    }
}

/// BT.601 luma of one RGB pixel, rounded to the nearest integer.
#[inline]
pub fn luma(rgb: [u8; 3]) -> u8 {
    let y = 0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Converts an RGB raster to a grayscale frame using BT.601 weights.
pub fn to_grayscale(rgb: &RgbFrame) -> Frame {
    let data = rgb.data.iter().map(|&p| luma(p)).collect();
    Frame {
        width: rgb.width,
        height: rgb.height,
        data,
        timestamp_index: 0,
        fps: DEFAULT_FPS,
    }
}

/// Builds an RGB raster from three separate channel planes.
pub fn rgb_from_planes(
    width: usize,
    height: usize,
    r: &[u8],
    g: &[u8],
    b: &[u8],
) -> Result<RgbFrame, ImagingError> {
    let n = width * height;
    for plane in [r, g, b] {
        if plane.len() != n {
            return Err(ImagingError::DimensionMismatch {
                width,
                height,
                len: plane.len(),
            });
        }
    }
    let data = (0..n).map(|i| [r[i], g[i], b[i]]).collect();
    RgbFrame::new(width, height, data)
}
