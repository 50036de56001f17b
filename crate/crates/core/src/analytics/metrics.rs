use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::detect::{rotated_iou, RotatedBox};
use crate::track::hungarian;
use crate::Point;

/// A ground-truth box. `ignore` marks objects that cannot be seen (e.g.
/// occluded): they are never counted as misses, and predictions on them are
/// not false positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub frame_index: u64,
    pub id: u64,
    pub bbox: RotatedBox,
    #[serde(default)]
    pub ignore: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredObject {
    pub frame_index: u64,
    pub id: u64,
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `1 - (fn + fp + id_switches) / gt_total`; negative when errors
    /// outnumber ground-truth boxes.
    pub mota: f64,
    /// Mean IoU between each matched ground-truth box and the same box moved
    /// to the predicted center.
    pub motp: f64,
    pub id_switches: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
    pub gt_total: u64,
    /// Set when there were no predictions, so precision is reported as 0.
    pub precision_undefined: bool,
}

fn ratios(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64, bool) {
    let undefined = tp + fp == 0;
    let precision = if undefined {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1, undefined)
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// CLEAR-MOT scores with center-distance matching.
///
/// Per frame, a ground-truth object keeps its previous partner when that
/// prediction is present and within `match_dist`; the rest are matched
/// optimally on distance. An identity switch is a ground-truth object matched
/// to a different prediction id than the last one it had.
pub fn evaluate_mot(
    gt: &[GtObject],
    pred: &[PredObject],
    match_dist: f64,
) -> Result<MotReport, AnalyticsError> {
    if !(match_dist > 0.0) {
        return Err(AnalyticsError::InvalidParameter(format!(
            "match distance {match_dist}"
        )));
    }
    let (first, last) = match (
        gt.iter().map(|g| g.frame_index).min(),
        gt.iter().map(|g| g.frame_index).max(),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(AnalyticsError::EmptyGroundTruth),
    };
    if let Some(p) = pred
        .iter()
        .find(|p| p.frame_index < first || p.frame_index > last)
    {
        return Err(AnalyticsError::FrameRange {
            frame: p.frame_index,
            first,
            last,
        });
    }
    let mut by_frame: BTreeMap<u64, (Vec<&GtObject>, Vec<&PredObject>)> = BTreeMap::new();
    for g in gt {
        by_frame.entry(g.frame_index).or_default().0.push(g);
    }
    for p in pred {
        by_frame.entry(p.frame_index).or_default().1.push(p);
    }

    let mut last_partner: HashMap<u64, u64> = HashMap::new();
    let (mut tp, mut fp, mut fn_, mut idsw, mut gt_total) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let mut iou_sum = 0.0;
    for (gts, preds) in by_frame.values() {
        let mut gt_used = vec![false; gts.len()];
        let mut pred_used = vec![false; preds.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (gi, g) in gts.iter().enumerate().filter(|(_, g)| !g.ignore) {
            if let Some(&pid) = last_partner.get(&g.id) {
                if let Some(pi) = preds
                    .iter()
                    .position(|p| p.id == pid && dist(p.center, g.bbox.center()) <= match_dist)
                {
                    if !pred_used[pi] {
                        gt_used[gi] = true;
                        pred_used[pi] = true;
                        pairs.push((gi, pi));
                    }
                }
            }
        }
        let free_g: Vec<usize> = (0..gts.len())
            .filter(|&i| !gt_used[i] && !gts[i].ignore)
            .collect();
        let free_p: Vec<usize> = (0..preds.len()).filter(|&i| !pred_used[i]).collect();
        let cost: Vec<Vec<f64>> = free_g
            .iter()
            .map(|&gi| {
                free_p
                    .iter()
                    .map(|&pi| {
                        let d = dist(gts[gi].bbox.center(), preds[pi].center);
                        if d <= match_dist {
                            d
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        for (r, c) in hungarian(&cost) {
            let (gi, pi) = (free_g[r], free_p[c]);
            gt_used[gi] = true;
            pred_used[pi] = true;
            pairs.push((gi, pi));
        }
        for &(gi, pi) in &pairs {
            let (g, p) = (gts[gi], preds[pi]);
            if last_partner
                .insert(g.id, p.id)
                .is_some_and(|prev| prev != p.id)
            {
                idsw += 1;
            }
            iou_sum += rotated_iou(&g.bbox, &g.bbox.with_center(p.center));
        }
        // leftover predictions sitting on an ignored object are not errors
        let on_ignored = |p: &PredObject| {
            gts.iter()
                .any(|g| g.ignore && dist(g.bbox.center(), p.center) <= match_dist)
        };
        let visible = gts.iter().filter(|g| !g.ignore).count() as u64;
        gt_total += visible;
        tp += pairs.len() as u64;
        fn_ += visible - pairs.len() as u64;
        fp += (0..preds.len())
            .filter(|&i| !pred_used[i] && !on_ignored(preds[i]))
            .count() as u64;
    }
    if gt_total == 0 {
        return Err(AnalyticsError::EmptyGroundTruth);
    }
    let (precision, recall, f1, precision_undefined) = ratios(tp, fp, fn_);
    Ok(MotReport {
        precision,
        recall,
        f1,
        mota: 1.0 - (fn_ + fp + idsw) as f64 / gt_total as f64,
        motp: if tp == 0 { 0.0 } else { iou_sum / tp as f64 },
        id_switches: idsw,
        fp,
        fn_,
        tp,
        gt_total,
        precision_undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
}

/// Per-frame one-to-one matching of boxes at IoU >= `iou_thr`, maximizing
/// total IoU. Ignored ground truth neither needs a match nor makes a match
/// on it a false positive.
pub fn evaluate_detections(
    gt: &[GtObject],
    dets: &[(u64, RotatedBox)],
    iou_thr: f64,
) -> Result<DetectionReport, AnalyticsError> {
    if gt.iter().all(|g| g.ignore) {
        return Err(AnalyticsError::EmptyGroundTruth);
    }
    let frames: BTreeSet<u64> = gt
        .iter()
        .map(|g| g.frame_index)
        .chain(dets.iter().map(|d| d.0))
        .collect();
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for f in frames {
        let g: Vec<&GtObject> = gt.iter().filter(|g| g.frame_index == f).collect();
        let d: Vec<&RotatedBox> = dets.iter().filter(|d| d.0 == f).map(|d| &d.1).collect();
        let cost: Vec<Vec<f64>> = g
            .iter()
            .map(|g| {
                d.iter()
                    .map(|b| {
                        let iou = rotated_iou(&g.bbox, b);
                        if iou >= iou_thr {
                            1.0 - iou
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        let pairs = hungarian(&cost);
        let matched_visible = pairs.iter().filter(|(gi, _)| !g[*gi].ignore).count() as u64;
        tp += matched_visible;
        fn_ += g.iter().filter(|g| !g.ignore).count() as u64 - matched_visible;
        fp += (d.len() - pairs.len()) as u64;
    }
    let (precision, recall, f1, precision_undefined) = ratios(tp, fp, fn_);
    Ok(DetectionReport {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        precision_undefined,
    })
}
