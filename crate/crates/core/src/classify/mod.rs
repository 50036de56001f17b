//! Rule-based vehicle classes from box geometry, template hints and color.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::Detection;
use crate::imaging::RgbFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleClass {
    Motorcycle,
    Taxi,
    PrivateCar,
    Pickup,
    Bus,
}

impl VehicleClass {
    pub const ALL: [VehicleClass; 5] = [
        VehicleClass::Motorcycle,
        VehicleClass::Taxi,
        VehicleClass::PrivateCar,
        VehicleClass::Pickup,
        VehicleClass::Bus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Motorcycle => "motorcycle",
            VehicleClass::Taxi => "taxi",
            VehicleClass::PrivateCar => "private_car",
            VehicleClass::Pickup => "pickup",
            VehicleClass::Bus => "bus",
        }
    }

    /// Position in [`VehicleClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VehicleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleClass {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VehicleClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("unknown vehicle class {0:?}")]
    UnknownClass(String),
    #[error("rules file {path}: {reason}")]
    Rules { path: String, reason: String },
}

/// Hue interval in degrees; `min_deg > max_deg` wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueBand {
    pub min_deg: f64,
    pub max_deg: f64,
    /// Grayish patches carry no usable hue.
    #[serde(default)]
    pub min_saturation: f64,
}

impl HueBand {
    pub fn contains(&self, hue_deg: f64, saturation: f64) -> bool {
        if saturation < self.min_saturation {
            return false;
        }
        if self.min_deg <= self.max_deg {
            (self.min_deg..=self.max_deg).contains(&hue_deg)
        } else {
            hue_deg >= self.min_deg || hue_deg <= self.max_deg
        }
    }
}

/// One predicate; every present bound must hold. Area is in level-0 px²,
/// aspect is long side over short side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub class: VehicleClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_aspect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_aspect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_hint: Option<VehicleClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hue: Option<HueBand>,
}

impl Rule {
    fn new(class: VehicleClass) -> Self {
        Self {
            class,
            min_area: None,
            max_area: None,
            min_aspect: None,
            max_aspect: None,
            class_hint: None,
            hue: None,
        }
    }

    fn matches(&self, f: &Features) -> bool {
        let ge = |v: f64, b: Option<f64>| b.is_none_or(|b| v >= b);
        let le = |v: f64, b: Option<f64>| b.is_none_or(|b| v <= b);
        ge(f.area, self.min_area)
            && le(f.area, self.max_area)
            && ge(f.aspect, self.min_aspect)
            && le(f.aspect, self.max_aspect)
            && self.class_hint.is_none_or(|h| f.class_hint == Some(h))
            && self
                .hue
                .is_none_or(|band| f.hue.is_some_and(|(h, s)| band.contains(h, s)))
    }
}

/// Ordered rule list. The first matching rule wins; a detection matching
/// none of them is a private car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRules {
    #[serde(rename = "rule", default)]
    pub rules: Vec<Rule>,
}

pub const FALLBACK_CLASS: VehicleClass = VehicleClass::PrivateCar;

impl Default for ClassRules {
    /// Template hints first, then size and color rules for detections
    /// without a hint. Sizes are calibrated for vehicles roughly 20 px long.
    fn default() -> Self {
        use VehicleClass::*;
        let yellow = HueBand {
            min_deg: 40.0,
            max_deg: 65.0,
            min_saturation: 0.35,
        };
        let hinted = |class, hint| Rule {
            class_hint: Some(hint),
            ..Rule::new(class)
        };
        let rules = vec![
            hinted(Bus, Bus),
            hinted(Motorcycle, Motorcycle),
            hinted(Pickup, Pickup),
            Rule {
                hue: Some(yellow),
                ..hinted(Taxi, PrivateCar)
            },
            hinted(PrivateCar, PrivateCar),
            Rule {
                min_area: Some(450.0),
                ..Rule::new(Bus)
            },
            Rule {
                max_area: Some(80.0),
                min_aspect: Some(2.5),
                ..Rule::new(Motorcycle)
            },
            Rule {
                min_area: Some(240.0),
                max_area: Some(450.0),
                ..Rule::new(Pickup)
            },
            Rule {
                min_area: Some(120.0),
                max_area: Some(240.0),
                hue: Some(yellow),
                ..Rule::new(Taxi)
            },
        ];
        Self { rules }
    }
}

impl ClassRules {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let err = |reason: String| ClassifyError::Rules {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_toml_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("rules serialize")
    }
}

/// Measurements a rule can test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    pub area: f64,
    pub aspect: f64,
    pub class_hint: Option<VehicleClass>,
    /// `(hue in degrees, saturation)` of the patch's mean color.
    pub hue: Option<(f64, f64)>,
}

impl Features {
    pub fn of(det: &Detection, color_patch: Option<&RgbFrame>) -> Self {
        let [w, h] = det.footprint;
        Self {
            area: w * h,
            aspect: w.max(h) / w.min(h),
            class_hint: det.class_hint,
            hue: color_patch.and_then(mean_hue),
        }
    }
}

/// Hue (degrees in `[0, 360)`) and HSV saturation of the patch's mean color;
/// `None` for an empty patch.
pub fn mean_hue(patch: &RgbFrame) -> Option<(f64, f64)> {
    let n = patch.data().len();
    if n == 0 {
        return None;
    }
    let mut sum = [0.0f64; 3];
    for px in patch.data() {
        for c in 0..3 {
            sum[c] += px[c] as f64;
        }
    }
    let [r, g, b] = sum.map(|s| s / n as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return Some((0.0, sat));
    }
    let h = if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    Some((h, sat))
}

/// Central square of the detection, half the short side wide, which stays
/// inside the vehicle body at any orientation.
pub fn body_patch(det: &Detection, rgb: &RgbFrame) -> Option<RgbFrame> {
    let side = (det.footprint[0].min(det.footprint[1]) / 2.0)
        .floor()
        .max(1.0) as usize;
    let x0 = (det.bbox.cx - (side as f64 - 1.0) / 2.0).round() as isize;
    let y0 = (det.bbox.cy - (side as f64 - 1.0) / 2.0).round() as isize;
    rgb.crop(x0, y0, side, side)
}

pub fn classify(
    det: &Detection,
    color_patch: Option<&RgbFrame>,
    rules: &ClassRules,
) -> VehicleClass {
    let f = Features::of(det, color_patch);
    rules
        .rules
        .iter()
        .find(|r| r.matches(&f))
        .map_or(FALLBACK_CLASS, |r| r.class)
}

/// Most frequent label; ties go to the earlier class in [`VehicleClass::ALL`].
pub fn majority_class(labels: impl IntoIterator<Item = VehicleClass>) -> Option<VehicleClass> {
    let mut counts = [0usize; 5];
    for c in labels {
        counts[c.index()] += 1;
    }
    let best = *counts.iter().max()?;
    (best > 0).then(|| VehicleClass::ALL[counts.iter().position(|&c| c == best).unwrap()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::RotatedBox;

    fn det(w: f64, h: f64, hint: Option<VehicleClass>) -> Detection {
        let mut d = Detection::new(RotatedBox::new(50.0, 50.0, w, h, 0.2), 0.9);
        d.class_hint = hint;
        d
    }

    fn patch(rgb: [u8; 3]) -> RgbFrame {
        RgbFrame::new(4, 4, vec![rgb; 16]).unwrap()
    }

    #[test]
    fn size_rules_without_hints() {
        let r = ClassRules::default();
        assert_eq!(
            classify(&det(40.0, 13.0, None), None, &r),
            VehicleClass::Bus
        );
        assert_eq!(
            classify(&det(10.0, 4.0, None), None, &r),
            VehicleClass::Motorcycle
        );
        // small but square: not a motorcycle
        assert_eq!(
            classify(&det(8.0, 8.0, None), None, &r),
            VehicleClass::PrivateCar
        );
        assert_eq!(
            classify(&det(24.0, 11.0, None), None, &r),
            VehicleClass::Pickup
        );
        assert_eq!(
            classify(&det(20.0, 10.0, None), None, &r),
            VehicleClass::PrivateCar
        );
    }

    #[test]
    fn yellow_car_is_taxi() {
        let r = ClassRules::default();
        let yellow = patch([230, 200, 40]);
        let blue = patch([40, 60, 200]);
        let gray = patch([200, 200, 190]);
        let car = det(20.0, 10.0, None);
        assert_eq!(classify(&car, Some(&yellow), &r), VehicleClass::Taxi);
        assert_eq!(classify(&car, Some(&blue), &r), VehicleClass::PrivateCar);
        assert_eq!(classify(&car, Some(&gray), &r), VehicleClass::PrivateCar);
        let hinted = det(20.0, 10.0, Some(VehicleClass::PrivateCar));
        assert_eq!(classify(&hinted, Some(&yellow), &r), VehicleClass::Taxi);
        assert_eq!(classify(&hinted, None, &r), VehicleClass::PrivateCar);
    }

    #[test]
    fn hints_override_size() {
        let r = ClassRules::default();
        assert_eq!(
            classify(&det(60.0, 30.0, Some(VehicleClass::Pickup)), None, &r),
            VehicleClass::Pickup
        );
    }

    #[test]
    fn empty_rules_fall_back() {
        let r = ClassRules { rules: vec![] };
        assert_eq!(classify(&det(40.0, 13.0, None), None, &r), FALLBACK_CLASS);
    }

    #[test]
    fn hue_of_primaries_and_wrap() {
        assert_eq!(mean_hue(&patch([255, 0, 0])), Some((0.0, 1.0)));
        assert_eq!(mean_hue(&patch([0, 255, 0])), Some((120.0, 1.0)));
        assert_eq!(mean_hue(&patch([0, 0, 255])), Some((240.0, 1.0)));
        let red = HueBand {
            min_deg: 340.0,
            max_deg: 20.0,
            min_saturation: 0.0,
        };
        assert!(red.contains(350.0, 1.0) && red.contains(5.0, 1.0) && !red.contains(180.0, 1.0));
    }

    #[test]
    fn rules_round_trip_through_toml() {
        let r = ClassRules::default();
        assert_eq!(ClassRules::from_toml_str(&r.to_toml_string()).unwrap(), r);
        let parsed = ClassRules::from_toml_str(
            "[[rule]]\nclass = \"bus\"\nmin_area = 100.0\n\n[[rule]]\nclass = \"taxi\"\nhue = { min_deg = 40.0, max_deg = 65.0 }\n",
        )
        .unwrap();
        assert_eq!(parsed.rules.len(), 2);
        assert!(ClassRules::from_toml_str("[[rule]]\nclass = \"tank\"\n").is_err());
    }

    #[test]
    fn majority_vote_ties_by_class_order() {
        use VehicleClass::*;
        assert_eq!(majority_class([Bus, Taxi, Bus]), Some(Bus));
        assert_eq!(majority_class([Bus, Taxi]), Some(Taxi));
        assert_eq!(majority_class([]), None);
    }

    #[test]
    fn parse_names() {
        for c in VehicleClass::ALL {
            assert_eq!(c.as_str().parse::<VehicleClass>().unwrap(), c);
        }
        assert!("car".parse::<VehicleClass>().is_err());
    }
}
