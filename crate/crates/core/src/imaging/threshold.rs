use super::{Frame, ImagingError};

/// Otsu's threshold.
///
/// Pixels `< t` form the background class and pixels `>= t` the foreground.
/// Every candidate `t` in `1..=255` is scored by its between-class variance;
/// the smallest maximizer is returned.
pub fn otsu_threshold(frame: &Frame) -> Result<u8, ImagingError> {
    let mut hist = [0u64; 256];
    for &v in frame.data() {
        hist[v as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(ImagingError::ConstantFrame);
    }
    let n = frame.data().len() as i128;
    let total: i128 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as i128 * c as i128)
        .sum();

    let (mut n0, mut s0) = (0i128, 0i128);
    let mut best: Option<(u8, f64)> = None;
    for t in 1..=255usize {
        n0 += hist[t - 1] as i128;
        s0 += (t as i128 - 1) * hist[t - 1] as i128;
        if n0 == 0 || n0 == n {
            continue;
        }
        // n^2 * between-class variance = (n*s0 - n0*S)^2 / (n0 * (n - n0))
        let d = (n * s0 - n0 * total) as f64;
        let score = d * d / (n0 as f64 * (n - n0) as f64);
        match best {
            Some((_, b)) if score <= b * (1.0 + 1e-12) => {}
            _ => best = Some((t as u8, score)),
        }
    }
    Ok(best.expect("two distinct levels guarantee a candidate").0)
}

/// Maps pixels `>= t` to 255 and the rest to 0.
pub fn binarize(frame: &Frame, t: u8) -> Frame {
    frame.with_pixels_of(
        frame
            .data()
            .iter()
            .map(|&v| if v >= t { 255 } else { 0 })
            .collect(),
    )
}

/// Local mean thresholding: a pixel is foreground when it exceeds the mean of
/// its `window x window` neighbourhood (edge-replicated) minus `c`.
pub fn adaptive_threshold(frame: &Frame, window: usize, c: f64) -> Result<Frame, ImagingError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(ImagingError::InvalidParameter(format!(
            "adaptive window must be odd and at least 3, got {window}"
        )));
    }
    let r = (window / 2) as isize;
    let (w, h) = (frame.width(), frame.height());
    // integral image over the edge-replicated, padded raster
    let pw = w + 2 * r as usize;
    let ph = h + 2 * r as usize;
    let mut integral = vec![0u64; (pw + 1) * (ph + 1)];
    for py in 0..ph {
        let mut row = 0u64;
        for px in 0..pw {
            row += frame.get_clamped(px as isize - r, py as isize - r) as u64;
            integral[(py + 1) * (pw + 1) + px + 1] = integral[py * (pw + 1) + px + 1] + row;
        }
    }
    let area = (window * window) as f64;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (x1, y1) = (x + window, y + window);
            let sum = integral[y1 * (pw + 1) + x1] + integral[y * (pw + 1) + x]
                - integral[y * (pw + 1) + x1]
                - integral[y1 * (pw + 1) + x];
            let mean = sum as f64 / area;
            out.push(if frame.get(x, y) as f64 > mean - c {
                255
            } else {
                0
            });
        }
    }
    Ok(frame.with_pixels_of(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search using exact rational comparison of the between-class
    /// variance, with class statistics accumulated straight from the pixels.
    fn otsu_oracle(data: &[u8]) -> Option<u8> {
        let n = data.len() as u128;
        let total: u128 = data.iter().map(|&v| v as u128).sum();
        let mut best: Option<(u8, u128, u128)> = None;
        for t in 1..=255u16 {
            let n0 = data.iter().filter(|&&v| (v as u16) < t).count() as u128;
            let s0: u128 = data
                .iter()
                .filter(|&&v| (v as u16) < t)
                .map(|&v| v as u128)
                .sum();
            if n0 == 0 || n0 == n {
                continue;
            }
            let d = (n * s0).abs_diff(n0 * total);
            let (num, den) = (d * d, n0 * (n - n0));
            match best {
                Some((_, bn, bd)) if num * bd <= bn * den => {}
                _ => best = Some((t as u8, num, den)),
            }
        }
        best.map(|b| b.0)
    }

    #[test]
    fn constant_frame_errors() {
        assert!(matches!(
            otsu_threshold(&Frame::filled(4, 4, 9)),
            Err(ImagingError::ConstantFrame)
        ));
    }

    #[test]
    fn half_black_half_white_takes_smallest_maximizer() {
        let mut data = vec![0u8; 32];
        data[16..].fill(255);
        let f = Frame::new(8, 4, data.clone()).unwrap();
        let t = otsu_threshold(&f).unwrap();
        assert_eq!(Some(t), otsu_oracle(&data));
        assert_eq!(t, 1);
    }

    #[test]
    fn two_level_frame_threshold_between_levels() {
        let data: Vec<u8> = (0..40).map(|i| if i % 3 == 0 { 50 } else { 200 }).collect();
        let t = otsu_threshold(&Frame::new(8, 5, data).unwrap()).unwrap();
        assert!(t > 50 && t < 200, "t = {t}");
        assert_eq!(t, 51);
    }

    #[test]
    fn binarize_splits_at_threshold() {
        let f = Frame::new(3, 1, vec![10, 100, 101]).unwrap();
        assert_eq!(binarize(&f, 101).data(), &[0, 0, 255]);
    }

    #[test]
    fn adaptive_marks_bright_spot() {
        let mut data = vec![50u8; 49];
        data[24] = 200;
        let f = Frame::new(7, 7, data).unwrap();
        let out = adaptive_threshold(&f, 3, 5.0).unwrap();
        assert_eq!(out.get(3, 3), 255);
        // flat pixels sit exactly at their mean and pass with c > 0
        assert_eq!(out.get(0, 0), 255);
        let strict = adaptive_threshold(&f, 3, -5.0).unwrap();
        assert_eq!(strict.get(0, 0), 0);
        assert_eq!(strict.get(3, 3), 255);
        assert!(adaptive_threshold(&f, 4, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn otsu_matches_exhaustive_oracle(
            data in proptest::collection::vec(any::<u8>(), 2..300),
        ) {
            let f = Frame::new(data.len(), 1, data.clone()).unwrap();
            match otsu_oracle(&data) {
                None => prop_assert!(otsu_threshold(&f).is_err()),
                Some(t) => prop_assert_eq!(otsu_threshold(&f).unwrap(), t),
            }
        }

        #[test]
        fn otsu_matches_oracle_on_few_levels(
            data in proptest::collection::vec(prop::sample::select(vec![0u8, 17, 90, 91, 200, 255]), 2..200),
        ) {
            let f = Frame::new(data.len(), 1, data.clone()).unwrap();
            match otsu_oracle(&data) {
                None => prop_assert!(otsu_threshold(&f).is_err()),
                Some(t) => prop_assert_eq!(otsu_threshold(&f).unwrap(), t),
            }
        }
    }
}
