use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{rotated_iou, Detection};

/// Descending score; ties go to the smaller center `y`, then smaller `x`.
pub fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.cy.total_cmp(&b.bbox.cy))
        .then(a.bbox.cx.total_cmp(&b.bbox.cx))
}

/// Greedy non-maximum suppression on rotated IoU.
///
/// Candidates are visited in [`rank_order`]; a candidate is dropped when its
/// IoU with any already kept detection exceeds `iou_thr`.
pub fn nms(mut dets: Vec<Detection>, iou_thr: f64) -> Vec<Detection> {
    dets.sort_by(rank_order);
    let mut keep: Vec<Detection> = Vec::with_capacity(dets.len());
    for d in dets {
        if keep
            .iter()
            .all(|k| rotated_iou(&k.bbox, &d.bbox) <= iou_thr)
        {
            keep.push(d);
        }
    }
    keep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SoftNmsMode {
    /// `s * (1 - iou)`
    Linear,
    /// `s * exp(-iou^2 / sigma)`
    Gaussian { sigma: f64 },
}

impl SoftNmsMode {
    pub fn attenuate(&self, score: f64, iou: f64) -> f64 {
        match *self {
            SoftNmsMode::Linear => score * (1.0 - iou),
            SoftNmsMode::Gaussian { sigma } => score * (-(iou * iou) / sigma).exp(),
        }
    }
}

/// Soft-NMS: the best remaining detection is kept and every other candidate
/// has its score attenuated by its overlap with it; candidates falling below
/// `final_thr` are dropped.
pub fn soft_nms(mut dets: Vec<Detection>, mode: SoftNmsMode, final_thr: f64) -> Vec<Detection> {
    let mut keep = Vec::with_capacity(dets.len());
    dets.retain(|d| d.score >= final_thr);
    while !dets.is_empty() {
        let best = (0..dets.len())
            .min_by(|&i, &j| rank_order(&dets[i], &dets[j]))
            .expect("non-empty");
        let top = dets.swap_remove(best);
        for d in dets.iter_mut() {
            let iou = rotated_iou(&top.bbox, &d.bbox);
            if iou > 0.0 {
                d.score = mode.attenuate(d.score, iou);
            }
        }
        dets.retain(|d| d.score >= final_thr);
        keep.push(top);
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::RotatedBox;
    use proptest::prelude::*;

    fn det(x0: f64, w: f64, score: f64) -> Detection {
        Detection::new(RotatedBox::from_corners(x0, 0.0, x0 + w, 10.0), score)
    }

    #[test]
    fn single_detection_kept() {
        let out = nms(vec![det(0.0, 10.0, 0.5)], 0.4);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn heavy_overlap_keeps_higher_score() {
        // [0,10] vs [2.5,12.5]: intersection 7.5, union 12.5 -> IoU 0.6
        let a = det(0.0, 10.0, 0.9);
        let b = det(2.5, 10.0, 0.8);
        assert!((rotated_iou(&a.bbox, &b.bbox) - 0.6).abs() < 1e-12);
        let out = nms(vec![b.clone(), a.clone()], 0.5);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn light_overlap_keeps_both() {
        // [0,10] vs [20/3, 50/3]: IoU 0.2
        let a = det(0.0, 10.0, 0.9);
        let b = det(20.0 / 3.0, 10.0, 0.8);
        assert!((rotated_iou(&a.bbox, &b.bbox) - 0.2).abs() < 1e-12);
        assert_eq!(nms(vec![a, b], 0.5).len(), 2);
    }

    #[test]
    fn ties_prefer_upper_left() {
        let a = Detection::new(RotatedBox::new(5.0, 9.0, 4.0, 4.0, 0.0), 0.7);
        let b = Detection::new(RotatedBox::new(6.0, 8.0, 4.0, 4.0, 0.0), 0.7);
        let out = nms(vec![a, b], 0.1);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox.cy, 8.0);
    }

    #[test]
    fn soft_nms_rescoring() {
        let mode = SoftNmsMode::Linear;
        assert!((mode.attenuate(0.8, 0.6) - 0.32).abs() < 1e-12);
        let g = SoftNmsMode::Gaussian { sigma: 0.5 };
        assert!((g.attenuate(0.8, 0.5) - 0.8 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((g.attenuate(0.8, 0.5) - 0.485).abs() < 1e-3);

        let a = det(0.0, 10.0, 0.9);
        let b = det(2.5, 10.0, 0.8);
        let out = soft_nms(vec![a, b], SoftNmsMode::Linear, 0.1);
        assert_eq!(out.len(), 2);
        assert!((out[1].score - 0.32).abs() < 1e-12);
    }

    #[test]
    fn soft_nms_non_overlapping_unchanged() {
        let dets = vec![det(0.0, 5.0, 0.9), det(10.0, 5.0, 0.8), det(20.0, 5.0, 0.7)];
        let out = soft_nms(dets.clone(), SoftNmsMode::Gaussian { sigma: 0.5 }, 0.3);
        assert_eq!(out, dets);
    }

    /// Plain reading of greedy suppression over a score-sorted list.
    fn greedy_trace(dets: &[Detection], thr: f64) -> Vec<Detection> {
        let mut order: Vec<usize> = (0..dets.len()).collect();
        order.sort_by(|&i, &j| rank_order(&dets[i], &dets[j]));
        let mut suppressed = vec![false; dets.len()];
        let mut kept = vec![];
        for (pos, &i) in order.iter().enumerate() {
            if suppressed[i] {
                continue;
            }
            kept.push(dets[i].clone());
            for &j in &order[pos + 1..] {
                if rotated_iou(&dets[i].bbox, &dets[j].bbox) > thr {
                    suppressed[j] = true;
                }
            }
        }
        kept
    }

    fn arb_dets() -> impl Strategy<Value = Vec<Detection>> {
        proptest::collection::vec(
            (
                0.0f64..40.0,
                0.0f64..40.0,
                3.0f64..12.0,
                3.0f64..12.0,
                -1.5f64..1.5,
                0.0f64..1.0,
            ),
            0..25,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(x, y, w, h, t, s)| Detection::new(RotatedBox::new(x, y, w, h, t), s))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn nms_is_clean_and_matches_trace(dets in arb_dets(), thr in 0.1f64..0.9) {
            let out = nms(dets.clone(), thr);
            prop_assert_eq!(&out, &greedy_trace(&dets, thr));
            for i in 0..out.len() {
                for j in i + 1..out.len() {
                    prop_assert!(rotated_iou(&out[i].bbox, &out[j].bbox) <= thr);
                }
                if i > 0 {
                    prop_assert!(out[i - 1].score >= out[i].score);
                }
            }
        }

        #[test]
        fn linear_soft_nms_with_high_floor_equals_hard_nms(
            clusters in proptest::collection::vec(
                proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.5f64..1.0), 1..4),
                1..6,
            ),
            angle in -1.0f64..1.0,
        ) {
            // clusters far apart; members jittered by at most a pixel, so every
            // pair either does not touch or overlaps heavily
            let mut dets = vec![];
            for (c, members) in clusters.iter().enumerate() {
                for &(dx, dy, s) in members {
                    let b = RotatedBox::new(100.0 * c as f64 + dx, dy, 10.0, 10.0, angle);
                    dets.push(Detection::new(b, s));
                }
            }
            let thr = 0.5;
            let mut floor: f64 = 0.0;
            for i in 0..dets.len() {
                for j in 0..dets.len() {
                    let iou = rotated_iou(&dets[i].bbox, &dets[j].bbox);
                    if i != j && iou > 0.0 {
                        prop_assert!(iou > thr);
                        floor = floor.max(dets[j].score * (1.0 - iou));
                    }
                }
            }
            let floor = floor + 1e-9;
            prop_assert!(floor <= 0.5);
            let key = |d: &Detection| (d.bbox.cx.to_bits(), d.bbox.cy.to_bits());
            let hard: Vec<_> = nms(dets.clone(), thr).iter().map(key).collect();
            let soft: Vec<_> = soft_nms(dets, SoftNmsMode::Linear, floor).iter().map(key).collect();
            prop_assert_eq!(hard, soft);
        }
    }
}
