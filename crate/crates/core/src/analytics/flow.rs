use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Gate};
use crate::{Point, VehicleClass};

/// One track's positions in gate coordinates, in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPath {
    pub track_id: u64,
    pub class: VehicleClass,
    pub points: Vec<(u64, Point)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub track_id: u64,
    pub gate: usize,
    /// Frame of the first sample past the gate.
    pub frame_index: u64,
    /// +1 when moving to the non-negative side, -1 otherwise.
    pub direction: i8,
}

fn side(g: &Gate, p: Point) -> f64 {
    let [a, b] = g.segment;
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Where along the step `p -> q` the gate line is met, and whether that point
/// lies on the segment.
fn step_crossing(g: &Gate, p: Point, q: Point) -> Option<(f64, i8)> {
    let (sp, sq) = (side(g, p), side(g, q));
    if (sp < 0.0) == (sq < 0.0) {
        return None;
    }
    let t = sp / (sp - sq);
    let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
    let [a, b] = g.segment;
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let u = ((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / (dx * dx + dy * dy);
    (0.0..=1.0)
        .contains(&u)
        .then_some((t, if sq < 0.0 { -1 } else { 1 }))
}

/// Every gate crossing of one track, in travel order. Within a single step,
/// gates are ordered by where the step meets them, then by gate index.
pub fn crossings(path: &TrackPath, gates: &[Gate]) -> Vec<Crossing> {
    let mut out = Vec::new();
    for w in path.points.windows(2) {
        let ((_, p), (f, q)) = (w[0], w[1]);
        let mut step: Vec<(f64, usize, i8)> = gates
            .iter()
            .enumerate()
            .filter_map(|(gi, g)| step_crossing(g, p, q).map(|(t, d)| (t, gi, d)))
            .collect();
        step.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.extend(step.into_iter().map(|(_, gate, direction)| Crossing {
            track_id: path.track_id,
            gate,
            frame_index: f,
            direction,
        }));
    }
    out
}

/// Crossings per gate and vehicle class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub gates: Vec<String>,
    /// `cells[gate][class.index()]`
    pub cells: Vec<[u64; 5]>,
}

impl CountTable {
    pub fn zeros(gates: &[Gate]) -> Self {
        Self {
            gates: gates.iter().map(|g| g.id.clone()).collect(),
            cells: vec![[0; 5]; gates.len()],
        }
    }

    pub fn get(&self, gate: usize, class: VehicleClass) -> u64 {
        self.cells[gate][class.index()]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    /// Counts of one class across gates.
    pub fn column(&self, class: VehicleClass) -> Vec<f64> {
        self.cells.iter().map(|r| r[class.index()] as f64).collect()
    }
}

pub fn count_crossings(paths: &[TrackPath], gates: &[Gate]) -> CountTable {
    let mut table = CountTable::zeros(gates);
    for p in paths {
        for c in crossings(p, gates) {
            table.cells[c.gate][p.class.index()] += 1;
        }
    }
    table
}

/// Trips from first to last crossed gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdMatrix {
    pub gates: Vec<String>,
    /// `cells[origin][destination]`
    pub cells: Vec<Vec<u64>>,
    /// Tracks with exactly one crossing, which have no trip to record.
    pub excluded_single_crossing: u64,
}

impl OdMatrix {
    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }
}

/// Tracks with at least two crossings contribute one trip each; tracks
/// crossing once are counted in `excluded_single_crossing`.
pub fn od_matrix(paths: &[TrackPath], gates: &[Gate]) -> OdMatrix {
    let mut od = OdMatrix {
        gates: gates.iter().map(|g| g.id.clone()).collect(),
        cells: vec![vec![0; gates.len()]; gates.len()],
        excluded_single_crossing: 0,
    };
    for p in paths {
        let c = crossings(p, gates);
        match c.as_slice() {
            [] => {}
            [_] => od.excluded_single_crossing += 1,
            [first, .., last] => od.cells[first.gate][last.gate] += 1,
        }
    }
    od
}

/// Counts scaled by the table maximum; all zeros when the table is empty.
pub fn heatmap_grid(counts: &CountTable) -> Vec<[f64; 5]> {
    let max = counts.cells.iter().flatten().copied().max().unwrap_or(0);
    counts
        .cells
        .iter()
        .map(|r| r.map(|c| if max == 0 { 0.0 } else { c as f64 / max as f64 }))
        .collect()
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Class-by-class Pearson r over observation points, in `VehicleClass::ALL`
/// order; `None` where a class never varies.
pub type CorrelationMatrix = [[Option<f64>; 5]; 5];

pub fn class_correlation(counts: &CountTable) -> Result<CorrelationMatrix, AnalyticsError> {
    if counts.gates.len() < 2 {
        return Err(AnalyticsError::TooFewPoints(counts.gates.len()));
    }
    let cols: Vec<Vec<f64>> = VehicleClass::ALL
        .iter()
        .map(|&c| counts.column(c))
        .collect();
    let mut m = [[None; 5]; 5];
    for i in 0..5 {
        for j in i..5 {
            let r = if i == j {
                pearson(&cols[i], &cols[i]).map(|_| 1.0)
            } else {
                pearson(&cols[i], &cols[j])
            };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::violations::CoordFrame;
    use proptest::prelude::*;

    fn gate(id: &str, a: Point, b: Point) -> Gate {
        Gate {
            id: id.into(),
            frame: CoordFrame::World,
            segment: [a, b],
        }
    }

    fn path(id: u64, class: VehicleClass, pts: &[Point]) -> TrackPath {
        TrackPath {
            track_id: id,
            class,
            points: pts
                .iter()
                .enumerate()
                .map(|(i, &p)| (i as u64, p))
                .collect(),
        }
    }

    fn gates() -> Vec<Gate> {
        vec![
            gate("A", [0.0, 0.0], [0.0, 10.0]),
            gate("B", [10.0, 0.0], [10.0, 10.0]),
        ]
    }

    #[test]
    fn empty_and_single_crossing() {
        let g = gates();
        assert_eq!(count_crossings(&[], &g).total(), 0);
        let t = path(
            1,
            VehicleClass::PrivateCar,
            &[[-1.0, 5.0], [1.0, 5.0], [2.0, 5.0]],
        );
        let c = count_crossings(std::slice::from_ref(&t), &g);
        assert_eq!(c.get(0, VehicleClass::PrivateCar), 1);
        assert_eq!(c.total(), 1);
        let od = od_matrix(&[t], &g);
        assert_eq!((od.total(), od.excluded_single_crossing), (0, 1));
    }

    #[test]
    fn missing_the_segment_is_not_a_crossing() {
        let t = path(1, VehicleClass::Bus, &[[-1.0, 20.0], [1.0, 20.0]]);
        assert!(crossings(&t, &gates()).is_empty());
    }

    #[test]
    fn od_through_and_u_turn() {
        let g = gates();
        let through = path(
            1,
            VehicleClass::Taxi,
            &[[-1.0, 5.0], [5.0, 5.0], [11.0, 5.0]],
        );
        let uturn = path(
            2,
            VehicleClass::Taxi,
            &[[-1.0, 5.0], [5.0, 5.0], [-1.0, 6.0]],
        );
        let od = od_matrix(&[through, uturn.clone()], &g);
        assert_eq!(od.cells, vec![vec![1, 1], vec![0, 0]]);
        let c = crossings(&uturn, &g);
        assert_eq!(
            c.iter().map(|c| c.direction).collect::<Vec<_>>(),
            vec![-1, 1]
        );
    }

    #[test]
    fn one_step_over_two_gates_keeps_travel_order() {
        let t = path(1, VehicleClass::Bus, &[[20.0, 5.0], [-5.0, 5.0]]);
        let c = crossings(&t, &gates());
        assert_eq!(c.iter().map(|c| c.gate).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn heatmap_normalization() {
        let mut t = CountTable::zeros(&gates());
        assert!(heatmap_grid(&t).iter().flatten().all(|&v| v == 0.0));
        t.cells[1][2] = 7;
        let h = heatmap_grid(&t);
        assert_eq!(h[1][2], 1.0);
        assert_eq!(h.iter().flatten().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn correlation_closed_forms() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| 5.0 - x).collect();
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        // deviations (-1, 1, -1, 1) and (-1, -1, 1, 1) are orthogonal
        assert!(
            pearson(&[1.0, 3.0, 1.0, 3.0], &[0.0, 0.0, 2.0, 2.0])
                .unwrap()
                .abs()
                < 1e-9
        );
        assert_eq!(pearson(&a, &[2.0; 4]), None);
    }

    #[test]
    fn correlation_needs_two_points() {
        let one = CountTable::zeros(&gates()[..1]);
        assert!(matches!(
            class_correlation(&one),
            Err(AnalyticsError::TooFewPoints(1))
        ));
        let mut t = CountTable::zeros(&gates());
        t.cells = vec![[1, 0, 5, 2, 0], [3, 0, 1, 4, 0]];
        let m = class_correlation(&t).unwrap();
        assert_eq!(m[1][1], None);
        assert_eq!(m[0][0], Some(1.0));
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, m[j][i]);
            }
        }
    }

    proptest! {
        #[test]
        fn heatmap_is_monotone(cells in proptest::collection::vec(proptest::array::uniform5(0u64..50), 1..6)) {
            let t = CountTable { gates: (0..cells.len()).map(|i| i.to_string()).collect(), cells };
            let h = heatmap_grid(&t);
            let flat: Vec<(u64, f64)> = t.cells.iter().flatten().copied().zip(h.iter().flatten().copied()).collect();
            for &(c1, v1) in &flat {
                prop_assert!((0.0..=1.0).contains(&v1));
                for &(c2, v2) in &flat {
                    if c1 > c2 {
                        prop_assert!(v1 >= v2);
                    }
                }
            }
        }
    }
}
