use super::{filter::quantize, Frame, ImagingError};

/// Lookup table `v -> round(255 * cdf(v) / n)` for a (possibly clipped) histogram.
fn equalization_lut(hist: &[f64; 256], n: f64) -> [u8; 256] {
    let mut lut = [0u8; 256];
    let mut cdf = 0.0;
    for (v, h) in hist.iter().enumerate() {
        cdf += h;
        lut[v] = quantize(255.0 * cdf / n);
    }
    lut
}

/// Global histogram equalization.
pub fn equalize_histogram(frame: &Frame) -> Frame {
    let mut hist = [0.0; 256];
    for &v in frame.data() {
        hist[v as usize] += 1.0;
    }
    let lut = equalization_lut(&hist, frame.data().len() as f64);
    frame.with_pixels_of(frame.data().iter().map(|&v| lut[v as usize]).collect())
}

fn tile_lut(
    frame: &Frame,
    x0: usize,
    y0: usize,
    tw: usize,
    th: usize,
    clip_limit: f64,
) -> [u8; 256] {
    let mut hist = [0.0f64; 256];
    for y in y0..y0 + th {
        for x in x0..x0 + tw {
            hist[frame.get_clamped(x as isize, y as isize) as usize] += 1.0;
        }
    }
    // a tile without contrast is left untouched
    if hist.iter().filter(|&&h| h > 0.0).count() < 2 {
        let mut id = [0u8; 256];
        id.iter_mut().enumerate().for_each(|(i, v)| *v = i as u8);
        return id;
    }
    let n = (tw * th) as f64;
    if clip_limit.is_finite() {
        let limit = (clip_limit * n / 256.0).max(1.0);
        let mut excess = 0.0;
        for h in hist.iter_mut() {
            if *h > limit {
                excess += *h - limit;
                *h = limit;
            }
        }
        let share = excess / 256.0;
        hist.iter_mut().for_each(|h| *h += share);
    }
    equalization_lut(&hist, n)
}

/// Contrast limited adaptive histogram equalization.
///
/// The frame is split into `tile_grid = (rows, cols)` tiles; tiles that run
/// past the frame edge are filled by edge replication. Each tile histogram is
/// clipped at `clip_limit` times the uniform bin height and the excess spread
/// evenly over all bins. Per-pixel output blends the four nearest tile
/// mappings bilinearly.
pub fn clahe(
    frame: &Frame,
    tile_grid: (usize, usize),
    clip_limit: f64,
) -> Result<Frame, ImagingError> {
    let (rows, cols) = tile_grid;
    if rows == 0 || cols == 0 {
        return Err(ImagingError::ZeroSizedTile);
    }
    if clip_limit.is_nan() || clip_limit < 1.0 {
        return Err(ImagingError::InvalidParameter(format!(
            "clip limit must be >= 1, got {clip_limit}"
        )));
    }
    let (w, h) = (frame.width(), frame.height());
    if w == 0 || h == 0 {
        return Ok(frame.clone());
    }
    let th = h.div_ceil(rows);
    let tw = w.div_ceil(cols);
    let luts: Vec<[u8; 256]> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| tile_lut(frame, c * tw, r * th, tw, th, clip_limit))
        .collect();

    let axis = |p: usize, size: usize, count: usize| -> (usize, usize, f64) {
        let f = (p as f64 - (size as f64 - 1.0) / 2.0) / size as f64;
        if f <= 0.0 {
            return (0, 0, 0.0);
        }
        let i0 = (f.floor() as usize).min(count - 1);
        let i1 = (i0 + 1).min(count - 1);
        (i0, i1, (f - i0 as f64).clamp(0.0, 1.0))
    };

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (r0, r1, wy) = axis(y, th, rows);
        for x in 0..w {
            let (c0, c1, wx) = axis(x, tw, cols);
            let v = frame.get(x, y) as usize;
            let m = |r: usize, c: usize| luts[r * cols + c][v] as f64;
            let top = m(r0, c0) * (1.0 - wx) + m(r0, c1) * wx;
            let bottom = m(r1, c0) * (1.0 - wx) + m(r1, c1) * wx;
            out.push(quantize(top * (1.0 - wy) + bottom * wy));
        }
    }
    Ok(frame.with_pixels_of(out))
}
