use serde::{Deserialize, Serialize};

use super::{Frame, ImagingError};

/// Noise-reduction filter applied before detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Denoise {
    Gaussian { sigma: f64 },
    Median { window: usize },
}

/// Normalized 1-D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>, ImagingError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ImagingError::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    Ok(k)
}

/// Separable convolution of a real-valued raster with an odd-length kernel,
/// replicating edge pixels. Output is not quantized.
pub fn convolve_separable(width: usize, height: usize, data: &[f64], kernel: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), width * height);
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (width as isize, height as isize);
    let mut tmp = vec![0.0; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let sx = (x + i as isize - r).clamp(0, w - 1) as usize;
                acc += k * row[sx];
            }
            tmp[y * width + x as usize] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for (i, &k) in kernel.iter().enumerate() {
            let sy = (y + i as isize - r).clamp(0, h - 1) as usize;
            let src = &tmp[sy * width..(sy + 1) * width];
            let dst = &mut out[y as usize * width..(y as usize + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
    out
}

pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub(crate) fn gaussian_blur(frame: &Frame, sigma: f64) -> Result<Frame, ImagingError> {
    let kernel = gaussian_kernel(sigma)?;
    let src: Vec<f64> = frame.data().iter().map(|&v| v as f64).collect();
    let out = convolve_separable(frame.width(), frame.height(), &src, &kernel);
    Ok(frame.with_pixels_of(out.into_iter().map(quantize).collect()))
}

fn median_filter(frame: &Frame, window: usize) -> Result<Frame, ImagingError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(ImagingError::InvalidParameter(format!(
            "median window must be odd and at least 3, got {window}"
        )));
    }
    let r = (window / 2) as isize;
    let mut buf = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(frame.data().len());
    for y in 0..frame.height() as isize {
        for x in 0..frame.width() as isize {
            buf.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    buf.push(frame.get_clamped(x + dx, y + dy));
                }
            }
            let mid = buf.len() / 2;
            out.push(*buf.select_nth_unstable(mid).1);
        }
    }
    Ok(frame.with_pixels_of(out))
}

/// Applies a Gaussian or median filter; both replicate edge pixels.
pub fn denoise(frame: &Frame, method: Denoise) -> Result<Frame, ImagingError> {
    match method {
        Denoise::Gaussian { sigma } => gaussian_blur(frame, sigma),
        Denoise::Median { window } => median_filter(frame, window),
    }
}
