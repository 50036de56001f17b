use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::Point;

/// Oriented rectangle: center, side lengths and orientation.
///
/// Corners are `center + R(theta) * (+-w/2, +-h/2)` with the same rotation
/// matrix used to rotate templates, so a box and the template it came from
/// share an orientation convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

/// Wraps an angle into `(-pi/2, pi/2]`; rectangles are symmetric under a half turn.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(PI);
    if t > FRAC_PI_2 {
        t -= PI;
    }
    // rem_euclid maps -pi/2 to pi/2 already; snap float fuzz at the boundary
    if (t + FRAC_PI_2).abs() < 1e-15 {
        t = FRAC_PI_2;
    }
    t
}

impl RotatedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Self {
        debug_assert!(w > 0.0 && h > 0.0, "box sides must be positive");
        Self {
            cx,
            cy,
            w,
            h,
            theta: normalize_angle(theta),
        }
    }

    /// Axis-aligned box from corner coordinates `[x0, y0, x1, y1]`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0, 0.0)
    }

    pub fn center(&self) -> Point {
        [self.cx, self.cy]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .map(|(dx, dy)| [self.cx + c * dx - s * dy, self.cy + s * dx + c * dy])
    }

    /// Width and height of the axis-aligned envelope.
    pub fn envelope(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            self.w * c.abs() + self.h * s.abs(),
            self.w * s.abs() + self.h * c.abs(),
        )
    }

    pub fn with_center(mut self, p: Point) -> Self {
        self.cx = p[0];
        self.cy = p[1];
        self
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    twice / 2.0
}

/// Sutherland-Hodgman clipping of `subject` against the convex polygon `clip`.
/// Both polygons must share the same (positive) orientation.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in != prev_in {
                let dp = [cur[0] - prev[0], cur[1] - prev[1]];
                let denom = (b[0] - a[0]) * dp[1] - (b[1] - a[1]) * dp[0];
                if denom.abs() > f64::EPSILON {
                    let t = cross(a, b, prev) / -denom;
                    output.push([prev[0] + t * dp[0], prev[1] + t * dp[1]]);
                }
            }
            if cur_in {
                output.push(cur);
            }
        }
    }
    output
}

/// Intersection over union of two oriented rectangles via exact polygon clipping.
pub fn rotated_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let (area_a, area_b) = (a.area(), b.area());
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    // quick reject on circumscribed circles
    let (dx, dy) = (a.cx - b.cx, a.cy - b.cy);
    let reach = (a.w.hypot(a.h) + b.w.hypot(b.h)) / 2.0;
    if dx * dx + dy * dy > reach * reach {
        return 0.0;
    }
    let inter = polygon_area(&clip_convex(&a.corners(), &b.corners())).max(0.0);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
