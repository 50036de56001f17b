use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectError, Detection, RotatedBox};
use crate::VehicleClass;

#[derive(Serialize, Deserialize)]
struct Row {
    frame_index: u64,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    theta: f64,
    score: f64,
    scale_index: usize,
    angle: f64,
    #[serde(default)]
    template_index: usize,
    #[serde(default)]
    class_hint: Option<VehicleClass>,
    #[serde(default)]
    footprint_w: Option<f64>,
    #[serde(default)]
    footprint_h: Option<f64>,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> DetectError {
    DetectError::Csv {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes `frame_index,cx,cy,w,h,theta,score,scale_index,angle` rows followed
/// by the template index, its class hint and the matched footprint.
pub fn write_detections_csv(path: &Path, dets: &[Detection]) -> Result<(), DetectError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for d in dets {
        let b = d.bbox;
        w.serialize(Row {
            frame_index: d.frame_index,
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            theta: b.theta,
            score: d.score,
            scale_index: d.scale_index,
            angle: d.angle,
            template_index: d.template_index,
            class_hint: d.class_hint,
            footprint_w: Some(d.footprint[0]),
            footprint_h: Some(d.footprint[1]),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// Reads a detections CSV. The trailing columns are optional: template index
/// defaults to `0`, class hint to `None` and the footprint to the box size.
pub fn read_detections_csv(path: &Path) -> Result<Vec<Detection>, DetectError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| csv_err(path, e))?;
            if !(row.w > 0.0 && row.h > 0.0) {
                return Err(csv_err(
                    path,
                    format!("non-positive box size at frame {}", row.frame_index),
                ));
            }
            Ok(Detection {
                bbox: RotatedBox::new(row.cx, row.cy, row.w, row.h, row.theta),
                footprint: [
                    row.footprint_w.unwrap_or(row.w),
                    row.footprint_h.unwrap_or(row.h),
                ],
                score: row.score,
                scale_index: row.scale_index,
                angle: row.angle,
                frame_index: row.frame_index,
                template_index: row.template_index,
                class_hint: row.class_hint,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.csv");
        let mut d = Detection::new(RotatedBox::new(10.25, 3.0, 8.0, 4.0, 0.3), 0.875).at_frame(7);
        d.scale_index = 2;
        d.template_index = 1;
        d.class_hint = Some(VehicleClass::Bus);
        d.footprint = [9.0, 5.0];
        write_detections_csv(&path, &[d.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "frame_index,cx,cy,w,h,theta,score,scale_index,angle,template_index,class_hint,footprint_w,footprint_h\n"
        ));
        assert_eq!(read_detections_csv(&path).unwrap(), vec![d]);
    }

    #[test]
    fn minimal_columns_are_enough() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.csv");
        std::fs::write(
            &path,
            "frame_index,cx,cy,w,h,theta,score,scale_index,angle\n3,1.5,2.5,8.0,4.0,0.0,0.9,0,0.0\n",
        )
        .unwrap();
        let d = &read_detections_csv(&path).unwrap()[0];
        assert_eq!(
            (d.footprint, d.class_hint, d.template_index),
            ([8.0, 4.0], None, 0)
        );
    }
}
