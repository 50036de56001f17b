use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ViolationError;
use crate::analytics::Gate;
use crate::geometry::Homography;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    NoParking,
    Crosswalk,
    UturnApproach,
    LaneRegion,
}

/// Coordinate frame of a layout item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordFrame {
    #[default]
    World,
    Pixel,
}

/// Where the U-turn is and which way traffic approaches it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproachAxis {
    /// A point on the U-turn stop line.
    pub stop_point: Point,
    /// Direction of travel toward the stop line.
    pub direction: Point,
}

impl ApproachAxis {
    /// Distance still to travel along the axis before reaching the stop line;
    /// negative past it.
    pub fn distance_to_stop(&self, p: Point) -> f64 {
        let [dx, dy] = self.direction;
        let n = dx.hypot(dy);
        ((self.stop_point[0] - p[0]) * dx + (self.stop_point[1] - p[1]) * dy) / n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    pub kind: ZoneKind,
    #[serde(default)]
    pub frame: CoordFrame,
    pub polygon: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<ApproachAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub id: u32,
    #[serde(default)]
    pub frame: CoordFrame,
    /// Polyline along the lane center.
    pub centerline: Vec<Point>,
}

/// Zones, lanes and counting gates of one scene.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneFile {
    #[serde(default, rename = "zone")]
    pub zones: Vec<Zone>,
    #[serde(default, rename = "lane")]
    pub lanes: Vec<Lane>,
    #[serde(default, rename = "gate")]
    pub gates: Vec<Gate>,
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let (o1, o2, o3, o4) = (
        orient(a, b, c),
        orient(a, b, d),
        orient(c, d, a),
        orient(c, d, b),
    );
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    ((o1 > 0.0) != (o2 > 0.0)
        && (o3 > 0.0) != (o4 > 0.0)
        && o1 != 0.0
        && o2 != 0.0
        && o3 != 0.0
        && o4 != 0.0)
        || on(a, b, c, o1)
        || on(a, b, d, o2)
        || on(c, d, a, o3)
        || on(c, d, b, o4)
}

/// At least 3 vertices and no two non-adjacent edges touching.
pub fn is_simple_polygon(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if !adjacent && segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

impl ZoneFile {
    pub fn from_toml_str(text: &str) -> Result<Self, ViolationError> {
        let f: ZoneFile =
            toml::from_str(text).map_err(|e| ViolationError::Layout(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, ViolationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ViolationError::Layout(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| ViolationError::Layout(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("layout serializes")
    }

    pub fn validate(&self) -> Result<(), ViolationError> {
        let bad = |m: String| Err(ViolationError::Layout(m));
        for z in &self.zones {
            if !is_simple_polygon(&z.polygon) {
                return bad(format!(
                    "zone {}: polygon must be simple with at least 3 vertices",
                    z.id
                ));
            }
            if z.kind == ZoneKind::UturnApproach {
                match z.axis {
                    None => return bad(format!("zone {}: uturn_approach needs an axis", z.id)),
                    Some(a) if a.direction[0] == 0.0 && a.direction[1] == 0.0 => {
                        return bad(format!("zone {}: zero axis direction", z.id))
                    }
                    _ => {}
                }
            }
        }
        for l in &self.lanes {
            if l.centerline.len() < 2 {
                return bad(format!("lane {}: centerline needs at least 2 points", l.id));
            }
        }
        for g in &self.gates {
            if g.segment[0] == g.segment[1] {
                return bad(format!("gate {}: zero-length segment", g.id));
            }
        }
        Ok(())
    }

    /// Every item mapped into ground coordinates; pixel-frame items go
    /// through `h`.
    pub fn to_world(&self, h: &Homography) -> Result<ZoneFile, ViolationError> {
        let map = |frame: CoordFrame, pts: &[Point]| -> Result<Vec<Point>, ViolationError> {
            match frame {
                CoordFrame::World => Ok(pts.to_vec()),
                CoordFrame::Pixel => pts
                    .iter()
                    .map(|&p| {
                        h.project(p)
                            .map_err(|e| ViolationError::Layout(e.to_string()))
                    })
                    .collect(),
            }
        };
        let mut out = self.clone();
        for z in &mut out.zones {
            z.polygon = map(z.frame, &z.polygon)?;
            if let Some(a) = &mut z.axis {
                if z.frame == CoordFrame::Pixel {
                    let tip = [
                        a.stop_point[0] + a.direction[0],
                        a.stop_point[1] + a.direction[1],
                    ];
                    let m = map(CoordFrame::Pixel, &[a.stop_point, tip])?;
                    *a = ApproachAxis {
                        stop_point: m[0],
                        direction: [m[1][0] - m[0][0], m[1][1] - m[0][1]],
                    };
                }
            }
            z.frame = CoordFrame::World;
        }
        for l in &mut out.lanes {
            l.centerline = map(l.frame, &l.centerline)?;
            l.frame = CoordFrame::World;
        }
        for g in &mut out.gates {
            let s = map(g.frame, &g.segment)?;
            g.segment = [s[0], s[1]];
            g.frame = CoordFrame::World;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn zones_of(&self, kind: ZoneKind) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(move |z| z.kind == kind)
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    cross.abs() <= 1e-12 * len.max(1.0) * len.max(1.0)
        && p[0] >= a[0].min(b[0]) - 1e-12
        && p[0] <= a[0].max(b[0]) + 1e-12
        && p[1] >= a[1].min(b[1]) - 1e-12
        && p[1] <= a[1].max(b[1]) + 1e-12
}

/// Ray-casting parity test; points on the boundary count as inside.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to a polyline.
pub fn polyline_distance(p: Point, line: &[Point]) -> f64 {
    line.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQUARE: [Point; 4] = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];

    /// Winding number around a closed polygon, with boundary points
    /// reported separately.
    fn winding(p: Point, poly: &[Point]) -> Option<i32> {
        let mut wn = 0;
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            let within = p[0] >= a[0].min(b[0])
                && p[0] <= a[0].max(b[0])
                && p[1] >= a[1].min(b[1])
                && p[1] <= a[1].max(b[1]);
            if cross == 0.0 && within {
                return None;
            }
            if a[1] <= p[1] {
                if b[1] > p[1] && cross > 0.0 {
                    wn += 1;
                }
            } else if b[1] <= p[1] && cross < 0.0 {
                wn -= 1;
            }
        }
        Some(wn)
    }

    #[test]
    fn square_examples() {
        assert!(point_in_polygon([5.0, 5.0], &SQUARE));
        assert!(!point_in_polygon([15.0, 5.0], &SQUARE));
        assert!(point_in_polygon([10.0, 5.0], &SQUARE));
        assert!(point_in_polygon([0.0, 0.0], &SQUARE));
        assert!(point_in_polygon([4.0, 10.0], &SQUARE));
    }

    #[test]
    fn simplicity() {
        assert!(is_simple_polygon(&SQUARE));
        let bowtie = [[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]];
        assert!(!is_simple_polygon(&bowtie));
        assert!(!is_simple_polygon(&SQUARE[..2]));
    }

    #[test]
    fn layout_parses_and_rejects_bad_items() {
        let text = r#"
[[zone]]
id = "np"
kind = "no_parking"
polygon = [[0, 0], [10, 0], [10, 5]]

[[zone]]
id = "ut"
kind = "uturn_approach"
frame = "pixel"
polygon = [[0, 0], [100, 0], [100, 20], [0, 20]]
axis = { stop_point = [100, 10], direction = [1, 0] }

[[lane]]
id = 0
centerline = [[0, 2], [100, 2]]

[[gate]]
id = "A"
segment = [[0, 0], [0, 10]]
"#;
        let f = ZoneFile::from_toml_str(text).unwrap();
        assert_eq!(f.zones.len(), 2);
        let w = f.to_world(&Homography::scaling(0.5).unwrap()).unwrap();
        assert_eq!(w.zones[1].polygon[1], [50.0, 0.0]);
        let axis = w.zones[1].axis.unwrap();
        assert_eq!(axis.stop_point, [50.0, 5.0]);
        assert!((axis.distance_to_stop([25.0, 5.0]) - 25.0).abs() < 1e-12);
        assert_eq!(ZoneFile::from_toml_str(&w.to_toml_string()).unwrap(), w);

        assert!(ZoneFile::from_toml_str(
            "[[zone]]\nid='x'\nkind='crosswalk'\npolygon=[[0,0],[1,1]]\n"
        )
        .is_err());
        assert!(ZoneFile::from_toml_str(
            "[[zone]]\nid='x'\nkind='uturn_approach'\npolygon=[[0,0],[1,0],[1,1]]\n"
        )
        .is_err());
    }

    #[test]
    fn polyline_distance_examples() {
        let l = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]];
        assert_eq!(polyline_distance([5.0, 3.0], &l), 3.0);
        assert_eq!(polyline_distance([13.0, 5.0], &l), 3.0);
        assert_eq!(polyline_distance([-3.0, -4.0], &l), 5.0);
    }

    proptest! {
        #[test]
        fn parity_matches_winding_number(
            pts in proptest::collection::vec((0i32..8, 0i32..8), 3..7),
            px in -1i32..9, py in -1i32..9,
        ) {
            // star-shaped around the centroid, so the polygon is simple
            let poly: Vec<Point> = pts.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
            let cx = poly.iter().map(|p| p[0]).sum::<f64>() / poly.len() as f64;
            let cy = poly.iter().map(|p| p[1]).sum::<f64>() / poly.len() as f64;
            let mut sorted = poly.clone();
            sorted.sort_by(|a, b| (a[1] - cy).atan2(a[0] - cx).total_cmp(&(b[1] - cy).atan2(b[0] - cx)));
            sorted.dedup();
            prop_assume!(sorted.len() >= 3 && is_simple_polygon(&sorted));
            prop_assume!(crate::detect::polygon_area(&sorted).abs() > 0.0);
            let p = [px as f64, py as f64];
            let want = winding(p, &sorted) != Some(0);
            prop_assert_eq!(point_in_polygon(p, &sorted), want);
        }
    }
}
