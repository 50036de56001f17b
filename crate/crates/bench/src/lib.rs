//! Seeded inputs shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skytraffic_core::{Frame, Point, RotatedBox, Template};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform noise frame.
pub fn noise_frame(width: usize, height: usize, seed: u64) -> Frame {
    let mut r = rng(seed);
    let data = (0..width * height).map(|_| r.gen()).collect();
    Frame::new(width, height, data).expect("valid size")
}

/// Template cut from `frame` at `(x, y)`.
pub fn cut_template(frame: &Frame, x: usize, y: usize, w: usize, h: usize) -> Template {
    let data = (0..h)
        .flat_map(|j| (0..w).map(move |i| frame.get(x + i, y + j) as f64))
        .collect();
    Template::new(w, h, data, None).expect("textured crop")
}

/// Square cost matrix with entries in `[0, 100)`.
pub fn cost_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (0..n).map(|_| r.gen_range(0.0..100.0)).collect())
        .collect()
}

/// Points scattered around a few dense blobs plus background noise.
pub fn clustered_points(n: usize, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    let centers: Vec<Point> = (0..5)
        .map(|_| [r.gen_range(0.0..500.0), r.gen_range(0.0..500.0)])
        .collect();
    (0..n)
        .map(|i| {
            if i % 4 == 0 {
                [r.gen_range(0.0..500.0), r.gen_range(0.0..500.0)]
            } else {
                let c = centers[i % centers.len()];
                [
                    c[0] + r.gen_range(-15.0..15.0),
                    c[1] + r.gen_range(-15.0..15.0),
                ]
            }
        })
        .collect()
}

/// Pairs of overlapping boxes at random orientations.
pub fn box_pairs(n: usize, seed: u64) -> Vec<(RotatedBox, RotatedBox)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let mut b = || {
                RotatedBox::new(
                    r.gen_range(0.0..10.0),
                    r.gen_range(0.0..10.0),
                    r.gen_range(5.0..20.0),
                    r.gen_range(5.0..20.0),
                    r.gen_range(-1.5..1.5),
                )
            };
            (b(), b())
        })
        .collect()
}
