use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::Point;

/// Uniform grid with `eps`-sized cells for radius queries.
struct GridIndex<'a> {
    points: &'a [Point],
    eps: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    fn new(points: &'a [Point], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, eps)).or_default().push(i);
        }
        Self { points, eps, cells }
    }

    fn key(p: &Point, eps: f64) -> (i64, i64) {
        ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64)
    }

    /// Indices within `eps` of point `i` (itself included), ascending.
    fn neighbors(&self, i: usize) -> Vec<usize> {
        let p = self.points[i];
        let (kx, ky) = Self::key(&p, self.eps);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(kx + dx, ky + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| {
                        let q = self.points[j];
                        (p[0] - q[0]).hypot(p[1] - q[1]) <= self.eps
                    }));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// DBSCAN labels: `Some(cluster)` or `None` for noise.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Clusters are numbered in order of their lowest-index core
/// point; a border point reachable from several clusters joins the one
/// numbered first.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let index = GridIndex::new(points, eps);
    let neigh: Vec<Vec<usize>> = (0..points.len()).map(|i| index.neighbors(i)).collect();
    let mut labels = vec![None; points.len()];
    let mut next = 0;
    for seed in 0..points.len() {
        if labels[seed].is_some() || neigh[seed].len() < min_pts {
            continue;
        }
        labels[seed] = Some(next);
        let mut stack = vec![seed];
        while let Some(i) = stack.pop() {
            if neigh[i].len() < min_pts {
                continue;
            }
            for &j in &neigh[i] {
                if labels[j].is_none() {
                    labels[j] = Some(next);
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CongestionConfig {
    /// Neighborhood radius in meters.
    pub eps_m: f64,
    pub min_pts: usize,
    /// A cluster must persist longer than this.
    pub persist_min_s: f64,
}

impl Default for CongestionConfig {
    fn default() -> Self {
        Self {
            eps_m: 8.0,
            min_pts: 4,
            persist_min_s: 30.0,
        }
    }
}

/// A dense group of vehicles that stayed together long enough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionRegion {
    pub id: usize,
    pub start_frame: u64,
    pub end_frame: u64,
    pub duration_s: f64,
    /// Mean of the per-frame cluster centroids.
    pub centroid: Point,
    pub peak_members: usize,
}

struct Chain {
    start: u64,
    last_frame: u64,
    last_centroid: Point,
    centroid_sum: Point,
    frames: usize,
    peak: usize,
}

/// Per-frame DBSCAN, chained across consecutive frames by centroid distance
/// below `eps_m`. Frames must be in increasing order. Point order within a
/// frame does not affect the result.
pub fn congestion_clusters(
    frames: &[(u64, Vec<Point>)],
    cfg: &CongestionConfig,
    fps: f64,
) -> Result<Vec<CongestionRegion>, AnalyticsError> {
    if !(cfg.eps_m > 0.0) || cfg.min_pts < 2 || !(fps > 0.0) {
        return Err(AnalyticsError::InvalidParameter(format!(
            "congestion needs eps_m > 0, min_pts >= 2, fps > 0 (got {}, {}, {fps})",
            cfg.eps_m, cfg.min_pts
        )));
    }
    let per_frame: Vec<Vec<(Point, usize)>> = frames
        .par_iter()
        .map(|(_, pts)| {
            let mut pts = pts.clone();
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let labels = dbscan(&pts, cfg.eps_m, cfg.min_pts);
            let n = labels.iter().flatten().map(|&l| l + 1).max().unwrap_or(0);
            let mut acc = vec![([0.0, 0.0], 0usize); n];
            for (p, l) in pts.iter().zip(&labels) {
                if let Some(l) = *l {
                    acc[l].0[0] += p[0];
                    acc[l].0[1] += p[1];
                    acc[l].1 += 1;
                }
            }
            acc.into_iter()
                .map(|(s, k)| ([s[0] / k as f64, s[1] / k as f64], k))
                .collect()
        })
        .collect();

    let mut done: Vec<Chain> = Vec::new();
    let mut active: Vec<Chain> = Vec::new();
    for ((f, _), clusters) in frames.iter().zip(per_frame) {
        let (mut live, ended): (Vec<Chain>, Vec<Chain>) =
            active.drain(..).partition(|c| c.last_frame + 1 == *f);
        done.extend(ended);
        let mut taken = vec![false; live.len()];
        let mut next = Vec::new();
        for (c, k) in clusters {
            let best = live
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken[*i])
                .map(|(i, ch)| {
                    (
                        i,
                        (ch.last_centroid[0] - c[0]).hypot(ch.last_centroid[1] - c[1]),
                    )
                })
                .filter(|&(_, d)| d < cfg.eps_m)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((i, _)) => {
                    taken[i] = true;
                    let ch = &mut live[i];
                    ch.last_frame = *f;
                    ch.last_centroid = c;
                    ch.centroid_sum[0] += c[0];
                    ch.centroid_sum[1] += c[1];
                    ch.frames += 1;
                    ch.peak = ch.peak.max(k);
                }
                None => next.push(Chain {
                    start: *f,
                    last_frame: *f,
                    last_centroid: c,
                    centroid_sum: c,
                    frames: 1,
                    peak: k,
                }),
            }
        }
        for (ch, t) in live.into_iter().zip(taken) {
            if t {
                active.push(ch);
            } else {
                done.push(ch);
            }
        }
        active.extend(next);
    }
    done.extend(active);
    done.sort_by_key(|c| (c.start, c.last_frame));

    let mut out = Vec::new();
    for c in done {
        let duration_s = (c.last_frame - c.start + 1) as f64 / fps;
        if duration_s > cfg.persist_min_s {
            out.push(CongestionRegion {
                id: out.len(),
                start_frame: c.start,
                end_frame: c.last_frame,
                duration_s,
                centroid: [
                    c.centroid_sum[0] / c.frames as f64,
                    c.centroid_sum[1] / c.frames as f64,
                ],
                peak_members: c.peak,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook DBSCAN with O(n^2) neighborhood scans and a FIFO queue.
    fn naive(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
        let n = points.len();
        let near = |i: usize| -> Vec<usize> {
            (0..n)
                .filter(|&j| {
                    (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]) <= eps
                })
                .collect()
        };
        let mut labels: Vec<Option<usize>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut c = 0;
        for i in 0..n {
            if visited[i] {
                continue;
            }
            visited[i] = true;
            let ni = near(i);
            if ni.len() < min_pts {
                continue;
            }
            labels[i] = Some(c);
            let mut queue: std::collections::VecDeque<usize> = ni.into();
            while let Some(j) = queue.pop_front() {
                if labels[j].is_none() {
                    labels[j] = Some(c);
                }
                if !visited[j] {
                    visited[j] = true;
                    let nj = near(j);
                    if nj.len() >= min_pts {
                        queue.extend(nj);
                    }
                }
            }
            c += 1;
        }
        labels
    }

    #[test]
    fn isolated_points_are_noise() {
        let pts: Vec<Point> = (0..10).map(|i| [i as f64 * 100.0, 0.0]).collect();
        assert!(dbscan(&pts, 5.0, 2).iter().all(Option::is_none));
    }

    #[test]
    fn stationary_queue_is_one_region() {
        let cfg = CongestionConfig {
            eps_m: 5.0,
            min_pts: 4,
            persist_min_s: 2.0,
        };
        let fps = 10.0;
        let queue: Vec<Point> = (0..6).map(|i| [i as f64 * 2.0, 0.0]).collect();
        let frames: Vec<(u64, Vec<Point>)> = (0..40).map(|f| (f, queue.clone())).collect();
        let r = congestion_clusters(&frames, &cfg, fps).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(
            (r[0].start_frame, r[0].end_frame, r[0].peak_members),
            (0, 39, 6)
        );
        // too short to persist
        assert!(congestion_clusters(&frames[..15], &cfg, fps)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let cfg = CongestionConfig {
            min_pts: 1,
            ..CongestionConfig::default()
        };
        assert!(congestion_clusters(&[], &cfg, 25.0).is_err());
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point>> {
        proptest::collection::vec(
            (0.0f64..60.0, 0.0f64..60.0).prop_map(|(x, y)| [x, y]),
            0..200,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn dbscan_matches_naive(pts in arb_points(), eps in 1.0f64..8.0, min_pts in 2usize..6) {
            prop_assert_eq!(dbscan(&pts, eps, min_pts), naive(&pts, eps, min_pts));
        }

        #[test]
        fn congestion_ignores_point_order(pts in arb_points(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = pts.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let cfg = CongestionConfig { eps_m: 4.0, min_pts: 3, persist_min_s: 0.1 };
            let a: Vec<_> = (0..5).map(|f| (f, pts.clone())).collect();
            let b: Vec<_> = (0..5).map(|f| (f, shuffled.clone())).collect();
            prop_assert_eq!(congestion_clusters(&a, &cfg, 10.0).unwrap(), congestion_clusters(&b, &cfg, 10.0).unwrap());
        }
    }
}
