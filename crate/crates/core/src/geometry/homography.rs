use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::Point;

/// Projective map from the image plane to the ground plane (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

const DENOM_EPS: f64 = 1e-12;

impl Homography {
    /// Scales the matrix so `h[2][2] == 1` when that entry is not ~0.
    pub fn from_matrix(h: Matrix3<f64>) -> Result<Self, GeometryError> {
        let norm = h.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(GeometryError::Singular);
        }
        let h = if h[(2, 2)].abs() > 1e-12 * norm {
            h / h[(2, 2)]
        } else {
            h / norm
        };
        if (h / h.norm()).determinant().abs() <= 1e-12 {
            return Err(GeometryError::Singular);
        }
        Ok(Self { h })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn identity() -> Self {
        Self {
            h: Matrix3::identity(),
        }
    }

    /// Uniform meters-per-pixel scale.
    pub fn scaling(meters_per_pixel: f64) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::new(
            meters_per_pixel,
            0.0,
            0.0,
            0.0,
            meters_per_pixel,
            0.0,
            0.0,
            0.0,
            1.0,
        ))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.h[(i, j)]))
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        Self::from_matrix(self.h.try_inverse().ok_or(GeometryError::Singular)?)
    }

    pub fn project(&self, p: Point) -> Result<Point, GeometryError> {
        let v = self.h * Vector3::new(p[0], p[1], 1.0);
        if v[2].abs() <= DENOM_EPS {
            return Err(GeometryError::PointAtInfinity { x: p[0], y: p[1] });
        }
        Ok([v[0] / v[2], v[1] / v[2]])
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Homography::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// A pixel location and its surveyed ground position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub pixel: Point,
    pub world: Point,
}

/// Estimated homography with its fit quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub homography: Homography,
    /// Reprojection RMS in pixels: world points mapped back through the inverse.
    pub rms_px: f64,
    /// Forward residual RMS in meters.
    pub rms_world: f64,
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn normalizer(pts: &[Point]) -> Option<Matrix3<f64>> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean = pts
        .iter()
        .map(|p| (p[0] - cx).hypot(p[1] - cy))
        .sum::<f64>()
        / n;
    if !(mean > 0.0 && mean.is_finite()) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean;
    Some(Matrix3::new(
        s,
        0.0,
        -s * cx,
        0.0,
        s,
        -s * cy,
        0.0,
        0.0,
        1.0,
    ))
}

fn apply(t: &Matrix3<f64>, p: Point) -> Point {
    let v = t * Vector3::new(p[0], p[1], 1.0);
    [v[0] / v[2], v[1] / v[2]]
}

/// Index triples whose points are collinear relative to the set's extent.
fn collinear_triples(pts: &[Point]) -> Vec<[usize; 3]> {
    let scale = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| (a[0] - b[0]).hypot(a[1] - b[1])))
        .fold(0.0, f64::max);
    let tol = 1e-9 * scale * scale;
    let mut out = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if cross.abs() <= tol {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Normalized direct linear transform over all correspondences.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Calibration, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::TooFewPoints {
            needed: 4,
            got: pairs.len(),
        });
    }
    let px: Vec<Point> = pairs.iter().map(|c| c.pixel).collect();
    let wd: Vec<Point> = pairs.iter().map(|c| c.world).collect();
    if let Some(bad) = px
        .iter()
        .chain(&wd)
        .position(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(GeometryError::Degenerate {
            points: vec![bad % pairs.len()],
            reason: "non-finite coordinate".into(),
        });
    }
    if pairs.len() == 4 {
        for (pts, side) in [(&px, "pixel"), (&wd, "world")] {
            if let Some(t) = collinear_triples(pts).first() {
                return Err(GeometryError::Degenerate {
                    points: t.to_vec(),
                    reason: format!("{side} points are collinear"),
                });
            }
        }
    }
    let degenerate = |reason: &str| {
        let triples = collinear_triples(&px);
        let mut points: Vec<usize> = triples.iter().flatten().copied().collect();
        points.sort_unstable();
        points.dedup();
        if points.is_empty() {
            points = (0..pairs.len()).collect();
        }
        GeometryError::Degenerate {
            points,
            reason: reason.to_string(),
        }
    };
    let tp = normalizer(&px).ok_or_else(|| degenerate("pixel points coincide"))?;
    let tw = normalizer(&wd).ok_or_else(|| degenerate("world points coincide"))?;

    // at least 9 rows so the SVD yields a full right basis
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let [x, y] = apply(&tp, c.pixel);
        let [u, v] = apply(&tw, c.world);
        let r = 2 * i;
        for (j, val) in [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]
            .into_iter()
            .enumerate()
        {
            a[(r, j)] = val;
        }
        for (j, val) in [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]
            .into_iter()
            .enumerate()
        {
            a[(r + 1, j)] = val;
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let (smallest, second) = (order[0], order[1]);
    let top = svd.singular_values[order[order.len() - 1]];
    // a second null direction means the solution is not unique
    if svd.singular_values[second] <= 1e-10 * top {
        return Err(degenerate(
            "correspondences do not determine a unique homography",
        ));
    }
    let hvec = vt.row(smallest);
    let hn = Matrix3::from_fn(|i, j| hvec[3 * i + j]);
    let tw_inv = tw.try_inverse().ok_or(GeometryError::Singular)?;
    let homography = Homography::from_matrix(tw_inv * hn * tp)
        .map_err(|_| degenerate("estimate is singular"))?;

    let inv = homography.inverse()?;
    let mut sq_px = 0.0;
    let mut sq_w = 0.0;
    for c in pairs {
        let back = inv.project(c.world)?;
        sq_px += (back[0] - c.pixel[0]).powi(2) + (back[1] - c.pixel[1]).powi(2);
        let fwd = homography.project(c.pixel)?;
        sq_w += (fwd[0] - c.world[0]).powi(2) + (fwd[1] - c.world[1]).powi(2);
    }
    let n = pairs.len() as f64;
    Ok(Calibration {
        homography,
        rms_px: (sq_px / n).sqrt(),
        rms_world: (sq_w / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs_from(h: &Homography, pixels: &[Point]) -> Vec<Correspondence> {
        pixels
            .iter()
            .map(|&p| Correspondence {
                pixel: p,
                world: h.project(p).unwrap(),
            })
            .collect()
    }

    const GRID: [Point; 6] = [
        [0.0, 0.0],
        [100.0, 5.0],
        [110.0, 90.0],
        [-5.0, 80.0],
        [50.0, 40.0],
        [30.0, 120.0],
    ];

    #[test]
    fn identity_recovered() {
        let cal = estimate_homography(&pairs_from(&Homography::identity(), &GRID[..4])).unwrap();
        let m = cal.homography.matrix();
        assert!((m - Matrix3::identity()).abs().max() < 1e-9, "{m}");
        assert!(cal.rms_px < 1e-9);
    }

    #[test]
    fn pure_scaling_recovered() {
        let truth = Homography::scaling(0.1).unwrap();
        let cal = estimate_homography(&pairs_from(&truth, &GRID)).unwrap();
        let m = cal.homography.matrix();
        assert!((m[(0, 0)] - 0.1).abs() < 1e-9 && (m[(1, 1)] - 0.1).abs() < 1e-9);
        let composed = truth.inverse().unwrap().matrix() * m;
        assert!(
            (composed / composed[(2, 2)] - Matrix3::identity())
                .abs()
                .max()
                < 1e-9
        );
    }

    #[test]
    fn collinear_points_rejected() {
        let line: Vec<Point> = (0..4).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let err = estimate_homography(&pairs_from(&Homography::identity(), &line)).unwrap_err();
        match err {
            GeometryError::Degenerate { points, .. } => assert_eq!(points, vec![0, 1, 2]),
            e => panic!("{e}"),
        }
        let mut pts = GRID[..4].to_vec();
        pts[3] = [50.0, 2.5]; // on the segment between points 0 and 1
        assert!(matches!(
            estimate_homography(&pairs_from(&Homography::identity(), &pts)),
            Err(GeometryError::Degenerate { .. })
        ));
        assert!(matches!(
            estimate_homography(&[]),
            Err(GeometryError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn all_collinear_many_points_rejected() {
        let line: Vec<Point> = (0..7).map(|i| [i as f64 * 10.0, 3.0]).collect();
        assert!(matches!(
            estimate_homography(&pairs_from(&Homography::identity(), &line)),
            Err(GeometryError::Degenerate { .. })
        ));
    }

    #[test]
    fn project_examples() {
        assert_eq!(
            Homography::identity().project([3.0, 4.0]).unwrap(),
            [3.0, 4.0]
        );
        let h = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(h.project([3.0, 4.0]).unwrap(), [6.0, 8.0]);
        let horizon =
            Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(
            horizon.project([-1.0, 5.0]),
            Err(GeometryError::PointAtInfinity { .. })
        ));
        assert!(
            Homography::from_rows([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]]).is_err()
        );
    }

    fn arb_homography() -> impl Strategy<Value = Homography> {
        (
            proptest::collection::vec(-0.3f64..0.3, 6),
            proptest::collection::vec(-1e-4f64..1e-4, 2),
            0.05f64..0.5,
        )
            .prop_filter_map("singular", |(a, p, s)| {
                Homography::from_rows([
                    [s + a[0] * s, a[1] * s, a[2] * 10.0],
                    [a[3] * s, s + a[4] * s, a[5] * 10.0],
                    [p[0], p[1], 1.0],
                ])
                .ok()
            })
    }

    proptest! {
        #[test]
        fn exact_projective_sets_reproject_to_zero(h in arb_homography(),
                                                   extra in proptest::collection::vec((0.0f64..400.0, 0.0f64..300.0), 0..8)) {
            let mut px = vec![[0.0, 0.0], [400.0, 0.0], [400.0, 300.0], [0.0, 300.0]];
            px.extend(extra.into_iter().map(|(x, y)| [x, y]));
            let cal = estimate_homography(&pairs_from(&h, &px)).unwrap();
            prop_assert!(cal.rms_px <= 1e-6, "rms {}", cal.rms_px);
            let want = h.matrix();
            prop_assert!((cal.homography.matrix() - want).abs().max() <= 1e-9 * want.abs().max().max(1.0));
        }

        #[test]
        fn inverse_round_trip(h in arb_homography(), x in 0.0f64..400.0, y in 0.0f64..300.0) {
            let w = h.project([x, y]).unwrap();
            let back = h.inverse().unwrap().project(w).unwrap();
            prop_assert!((back[0] - x).abs() <= 1e-9 && (back[1] - y).abs() <= 1e-9);
        }
    }
}
