use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{DetectError, Template};
use crate::imaging::Frame;

fn check_fit(frame: &Frame, t: &Template) -> Result<(), DetectError> {
    if t.width() > frame.width() || t.height() > frame.height() {
        return Err(DetectError::TemplateTooLarge {
            template: (t.width(), t.height()),
            frame: (frame.width(), frame.height()),
        });
    }
    Ok(())
}

/// Normalized cross-correlation of the template placed with its top-left
/// corner at `(x, y)`.
///
/// The local patch mean and the global template mean are both subtracted.
/// Returns `Ok(None)` when the patch has zero variance and the score is
/// undefined.
pub fn ncc_score(
    frame: &Frame,
    t: &Template,
    x: usize,
    y: usize,
) -> Result<Option<f64>, DetectError> {
    check_fit(frame, t)?;
    if x + t.width() > frame.width() || y + t.height() > frame.height() {
        return Err(DetectError::OutOfBounds { x, y });
    }
    let n = (t.width() * t.height()) as f64;
    let mut patch_sum = 0.0;
    for v in 0..t.height() {
        for u in 0..t.width() {
            patch_sum += frame.get(x + u, y + v) as f64;
        }
    }
    let patch_mean = patch_sum / n;
    let t_mean = t.mean();
    let (mut num, mut ii, mut tt) = (0.0, 0.0, 0.0);
    for v in 0..t.height() {
        for u in 0..t.width() {
            let di = frame.get(x + u, y + v) as f64 - patch_mean;
            let dt = t.get(u, v) - t_mean;
            num += di * dt;
            ii += di * di;
            tt += dt * dt;
        }
    }
    let denom = (ii * tt).sqrt();
    if ii == 0.0 || denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((num / denom).clamp(-1.0, 1.0)))
}

/// Dense NCC scores for every placement of a template inside a frame.
///
/// Placements whose patch has zero variance hold `f64::NEG_INFINITY`, so they
/// rank below every defined score.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    width: usize,
    height: usize,
    scores: Vec<f64>,
}

impl ResponseMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw score with `NEG_INFINITY` marking undefined placements.
    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    /// Defined score at `(x, y)`; `None` when undefined or out of range.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let s = self.raw(x, y);
        s.is_finite().then_some(s)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Strict 8-neighbourhood maxima with score above `threshold`, in raster order.
    /// Sub-pixel location of a peak from a parabola fitted through it and
    /// its two neighbours along each axis. An axis without two finite
    /// neighbours keeps the integer coordinate.
    pub fn refine(&self, x: usize, y: usize) -> [f64; 2] {
        let c = self.raw(x, y);
        let offset = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(a), Some(b)) => {
                let curv = a - 2.0 * c + b;
                if curv < 0.0 {
                    (0.5 * (a - b) / curv).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        let dx = offset(
            x.checked_sub(1).and_then(|xl| self.get(xl, y)),
            self.get(x + 1, y),
        );
        let dy = offset(
            y.checked_sub(1).and_then(|yl| self.get(x, yl)),
            self.get(x, y + 1),
        );
        [x as f64 + dx, y as f64 + dy]
    }

    pub fn peaks(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let s = self.raw(x, y);
                if !(s > threshold) {
                    continue;
                }
                let mut is_max = true;
                'nb: for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        if nx < 0
                            || ny < 0
                            || nx >= self.width as isize
                            || ny >= self.height as isize
                        {
                            continue;
                        }
                        if self.raw(nx as usize, ny as usize) >= s {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    out.push((x, y, s));
                }
            }
        }
        out
    }
}

/// Everything about a frame that is shared by the templates correlated
/// against it: the spectrum of the mean-removed frame and integer integral
/// images of values and squared values.
#[derive(Debug, Clone)]
pub struct FrameSpectrum {
    width: usize,
    height: usize,
    data: Vec<Complex<f64>>,
    sum: Vec<u64>,
    sq: Vec<u64>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place 2-D transform of a row-major `w x h` buffer. Only the first
/// `rows_in` rows are transformed along x before the column pass, and only
/// the first `rows_out` rows after it; callers use this to skip rows that
/// are known to be zero or are not needed.
fn fft2(
    buf: &mut [Complex<f64>],
    w: usize,
    h: usize,
    inverse: bool,
    rows_in: usize,
    rows_out: usize,
) {
    let (row, col) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            (p.plan_fft_inverse(w), p.plan_fft_inverse(h))
        } else {
            (p.plan_fft_forward(w), p.plan_fft_forward(h))
        }
    });
    if !inverse {
        row.process(&mut buf[..rows_in * w]);
    }
    let mut t = vec![Complex::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = buf[y * w + x];
        }
    }
    col.process(&mut t);
    for y in 0..h {
        for x in 0..w {
            buf[y * w + x] = t[x * h + y];
        }
    }
    if inverse {
        row.process(&mut buf[..rows_out * w]);
    }
}

impl FrameSpectrum {
    pub fn new(frame: &Frame) -> Self {
        let (w, h) = (frame.width(), frame.height());
        let mean = frame.data().iter().map(|&v| v as f64).sum::<f64>() / (w * h) as f64;
        let mut data: Vec<Complex<f64>> = frame
            .data()
            .iter()
            .map(|&v| Complex::new(v as f64 - mean, 0.0))
            .collect();
        fft2(&mut data, w, h, false, h, h);

        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sq = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0u64, 0u64);
            for (x, &v) in frame.row(y).iter().enumerate() {
                rs += v as u64;
                rq += (v as u64) * (v as u64);
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
            }
        }
        Self {
            width: w,
            height: h,
            data,
            sum,
            sq,
        }
    }

    /// Sum over the `tw x th` window at `(x, y)` of an integral image.
    #[inline]
    fn rect(&self, ii: &[u64], x: usize, y: usize, tw: usize, th: usize) -> u64 {
        let stride = self.width + 1;
        ii[(y + th) * stride + x + tw] + ii[y * stride + x]
            - ii[y * stride + x + tw]
            - ii[(y + th) * stride + x]
    }
}

/// Computes NCC at every valid placement.
///
/// Patch sums come from exact integer integral images; the cross term with
/// the zero-mean template is a circular correlation done with FFTs, which
/// equals the linear one on valid placements because those never wrap.
pub fn response_map(frame: &Frame, t: &Template) -> Result<ResponseMap, DetectError> {
    check_fit(frame, t)?;
    let mut maps = response_maps_with(&FrameSpectrum::new(frame), &[t])?;
    Ok(maps.remove(0))
}

/// [`response_map`] for several templates against one prepared frame, in
/// input order. Templates are correlated two at a time, one as the real and
/// one as the imaginary part of a single complex transform.
pub fn response_maps_with(
    spectrum: &FrameSpectrum,
    templates: &[&Template],
) -> Result<Vec<ResponseMap>, DetectError> {
    let (fw, fh) = (spectrum.width, spectrum.height);
    for t in templates {
        if t.width() > fw || t.height() > fh {
            return Err(DetectError::TemplateTooLarge {
                template: (t.width(), t.height()),
                frame: (fw, fh),
            });
        }
    }
    let mut out = Vec::with_capacity(templates.len());
    for pair in templates.chunks(2) {
        let rows_in = pair.iter().map(|t| t.height()).max().unwrap_or(0);
        let rows_out = pair.iter().map(|t| fh - t.height() + 1).max().unwrap_or(0);
        let mut buf = vec![Complex::new(0.0, 0.0); fw * fh];
        for (part, t) in pair.iter().enumerate() {
            let mean = t.mean();
            for v in 0..t.height() {
                for u in 0..t.width() {
                    let z = t.get(u, v) - mean;
                    let c = &mut buf[v * fw + u];
                    if part == 0 {
                        c.re = z;
                    } else {
                        c.im = z;
                    }
                }
            }
        }
        fft2(&mut buf, fw, fh, false, rows_in, fh);
        // sum_u f(x + u) z(u) has spectrum F(k) Z(-k); with f real the real
        // and imaginary parts of the result belong to the two templates
        let mut prod = vec![Complex::new(0.0, 0.0); fw * fh];
        for ky in 0..fh {
            let my = (fh - ky) % fh;
            for kx in 0..fw {
                let mx = (fw - kx) % fw;
                prod[ky * fw + kx] = spectrum.data[ky * fw + kx] * buf[my * fw + mx];
            }
        }
        fft2(&mut prod, fw, fh, true, fh, rows_out);
        let scale = 1.0 / (fw * fh) as f64;
        for (part, t) in pair.iter().enumerate() {
            let cross = |x: usize, y: usize| {
                let c = prod[y * fw + x];
                scale * if part == 0 { c.re } else { c.im }
            };
            out.push(normalize(spectrum, t, cross));
        }
    }
    Ok(out)
}

/// Turns raw cross terms into NCC scores using the patch statistics.
fn normalize(
    spectrum: &FrameSpectrum,
    t: &Template,
    cross: impl Fn(usize, usize) -> f64,
) -> ResponseMap {
    let (tw, th) = (t.width(), t.height());
    let (nx, ny) = (spectrum.width - tw + 1, spectrum.height - th + 1);
    let mean = t.mean();
    let t_energy: f64 = t.data().iter().map(|v| (v - mean) * (v - mean)).sum();
    let n = (tw * th) as u128;
    let mut scores = vec![f64::NEG_INFINITY; nx * ny];
    for y in 0..ny {
        let out = &mut scores[y * nx..(y + 1) * nx];
        for (x, o) in out.iter_mut().enumerate() {
            let s = spectrum.rect(&spectrum.sum, x, y, tw, th) as u128;
            let q = spectrum.rect(&spectrum.sq, x, y, tw, th) as u128;
            // n^2 * patch variance, exact
            let var_n2 = n * q - s * s;
            if var_n2 == 0 {
                continue;
            }
            let patch_energy = var_n2 as f64 / n as f64;
            *o = (cross(x, y) / (patch_energy * t_energy).sqrt()).clamp(-1.0, 1.0);
        }
    }
    ResponseMap {
        width: nx,
        height: ny,
        scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn patterned_template() -> Template {
        let data = vec![
            10.0, 20.0, 30.0, 40.0, //
            50.0, 200.0, 210.0, 60.0, //
            70.0, 220.0, 230.0, 80.0,
        ];
        Template::new(4, 3, data, None).unwrap()
    }

    fn paste(
        frame: &mut [u8],
        fw: usize,
        t: &Template,
        x: usize,
        y: usize,
        f: impl Fn(f64) -> f64,
    ) {
        for v in 0..t.height() {
            for u in 0..t.width() {
                frame[(y + v) * fw + x + u] = f(t.get(u, v)).round() as u8;
            }
        }
    }

    #[test]
    fn self_match_is_one() {
        let t = patterned_template();
        let f = t.to_frame();
        assert!((ncc_score(&f, &t, 0, 0).unwrap().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_patch_scores_one_and_inverse_scores_minus_one() {
        let t = patterned_template();
        let mut data = vec![0u8; 12];
        paste(&mut data, 4, &t, 0, 0, |v| 0.5 * v + 7.0);
        // 0.5*v + 7 is integral for these values, so no clamping or rounding
        let f = Frame::new(4, 3, data).unwrap();
        assert!((ncc_score(&f, &t, 0, 0).unwrap().unwrap() - 1.0).abs() < 1e-9);

        let mut inv = vec![0u8; 12];
        paste(&mut inv, 4, &t, 0, 0, |v| 255.0 - v);
        let f = Frame::new(4, 3, inv).unwrap();
        assert!((ncc_score(&f, &t, 0, 0).unwrap().unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_patch_is_undefined() {
        let t = patterned_template();
        let f = Frame::filled(10, 10, 90);
        assert_eq!(ncc_score(&f, &t, 2, 2).unwrap(), None);
        let map = response_map(&f, &t).unwrap();
        assert!((0..map.height()).all(|y| (0..map.width()).all(|x| map.get(x, y).is_none())));
        assert!(map.peaks(0.0).is_empty());
    }

    #[test]
    fn template_larger_than_frame_errors() {
        let t = patterned_template();
        let f = Frame::filled(3, 3, 0);
        assert!(matches!(
            response_map(&f, &t),
            Err(DetectError::TemplateTooLarge { .. })
        ));
        assert!(matches!(
            ncc_score(&Frame::filled(5, 5, 0), &t, 2, 0),
            Err(DetectError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn single_copy_peaks_at_its_placement() {
        let t = patterned_template();
        let (fw, fh) = (20, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data: Vec<u8> = (0..fw * fh).map(|_| rng.gen_range(100..110)).collect();
        paste(&mut data, fw, &t, 9, 6, |v| v);
        let f = Frame::new(fw, fh, data).unwrap();
        let map = response_map(&f, &t).unwrap();
        let best = (0..map.height())
            .flat_map(|y| (0..map.width()).map(move |x| (x, y)))
            .max_by(|a, b| map.raw(a.0, a.1).total_cmp(&map.raw(b.0, b.1)))
            .unwrap();
        assert_eq!(best, (9, 6));
        assert!((map.raw(9, 6) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_copies_two_unit_peaks() {
        let t = patterned_template();
        let (fw, fh) = (30, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data: Vec<u8> = (0..fw * fh).map(|_| rng.gen_range(100..106)).collect();
        paste(&mut data, fw, &t, 2, 3, |v| v);
        paste(&mut data, fw, &t, 20, 7, |v| v);
        let f = Frame::new(fw, fh, data).unwrap();
        let map = response_map(&f, &t).unwrap();
        // exhaustive per-placement oracle
        let mut unit = vec![];
        for y in 0..map.height() {
            for x in 0..map.width() {
                let s = ncc_score(&f, &t, x, y)
                    .unwrap()
                    .unwrap_or(f64::NEG_INFINITY);
                assert!((s - map.raw(x, y)).abs() < 1e-9);
                if (s - 1.0).abs() < 1e-9 {
                    unit.push((x, y));
                }
            }
        }
        assert_eq!(unit, vec![(2, 3), (20, 7)]);
        let peaks: Vec<_> = map.peaks(0.99).into_iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(peaks, vec![(2, 3), (20, 7)]);
    }

    #[test]
    fn plateau_is_not_a_strict_peak() {
        let map = ResponseMap {
            width: 3,
            height: 1,
            scores: vec![0.9, 0.9, 0.1],
        };
        assert!(map.peaks(0.5).is_empty());
    }

    #[test]
    fn refine_recovers_parabola_vertex() {
        // samples of 1 - (x - 2.3)^2 / 10 and 1 - (y - 0.8)^2 / 10
        let f = |x: f64, y: f64| 1.0 - ((x - 2.3).powi(2) + (y - 0.8).powi(2)) / 10.0;
        let (w, h) = (5, 3);
        let scores = (0..h)
            .flat_map(|y| (0..w).map(move |x| f(x as f64, y as f64)))
            .collect();
        let map = ResponseMap {
            width: w,
            height: h,
            scores,
        };
        let [x, y] = map.refine(2, 1);
        assert!((x - 2.3).abs() < 1e-12 && (y - 0.8).abs() < 1e-12);
        // on the border only the interior axis moves
        assert_eq!(map.refine(0, 1)[0], 0.0);
    }

    #[test]
    fn paired_maps_equal_single_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let frame = Frame::new(23, 17, (0..23 * 17).map(|_| rng.gen()).collect()).unwrap();
        let ts: Vec<Template> = [(5, 4), (3, 7), (6, 6)]
            .iter()
            .map(|&(w, h)| {
                Template::new(
                    w,
                    h,
                    (0..w * h).map(|_| rng.gen_range(0.0..255.0)).collect(),
                    None,
                )
                .unwrap()
            })
            .collect();
        let spectrum = FrameSpectrum::new(&frame);
        let refs: Vec<&Template> = ts.iter().collect();
        let maps = response_maps_with(&spectrum, &refs).unwrap();
        for (t, m) in ts.iter().zip(&maps) {
            for y in 0..m.height() {
                for x in 0..m.width() {
                    let direct = ncc_score(&frame, t, x, y).unwrap().unwrap();
                    assert!((m.raw(x, y) - direct).abs() < 1e-9);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn dense_map_agrees_with_direct_score(seed in any::<u64>(), tw in 3usize..7, th in 3usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (fw, fh) = (tw + rng.gen_range(0..6), th + rng.gen_range(0..6));
            let levels = rng.gen_range(1..=255u32);
            let data: Vec<u8> = (0..fw * fh).map(|_| rng.gen_range(0..=levels) as u8).collect();
            let f = Frame::new(fw, fh, data).unwrap();
            let tdata: Vec<f64> = (0..tw * th).map(|_| rng.gen_range(0.0..255.0)).collect();
            let t = Template::new(tw, th, tdata, None).unwrap();
            let map = response_map(&f, &t).unwrap();
            for y in 0..map.height() {
                for x in 0..map.width() {
                    let direct = ncc_score(&f, &t, x, y).unwrap();
                    match direct {
                        None => prop_assert!(map.get(x, y).is_none()),
                        Some(s) => {
                            prop_assert!((-1.0..=1.0).contains(&s));
                            prop_assert!((map.get(x, y).unwrap() - s).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }
}
