//! Plot data for the generalized FP/FN plane: classifier points, each group's
//! calibrated line, the equal-cost level curve, and the trivial diagonal.

use serde::{Deserialize, Serialize};

use crate::cost::{calibrated_line, level_curve, trivial_diagonal, CostSpec, Segment};
use crate::dataset::GroupData;
use crate::error::{Error, Result};
use crate::metrics::RatePoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub label: String,
    pub group: String,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl ScenePoint {
    pub fn new(label: impl Into<String>, group: impl Into<String>, rate: RatePoint) -> Self {
        Self {
            label: label.into(),
            group: group.into(),
            fp: rate.c_fp,
            fn_: rate.c_fn,
        }
    }

    pub fn rate(&self) -> RatePoint {
        RatePoint::new(self.fp, self.fn_)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLine {
    pub group: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLevelCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl SceneLevelCurve {
    pub fn segment(&self) -> Segment {
        Segment {
            x0: self.x0,
            y0: self.y0,
            x1: self.x1,
            y1: self.y1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneScene {
    pub points: Vec<ScenePoint>,
    pub lines: Vec<SceneLine>,
    pub level_curves: Vec<SceneLevelCurve>,
    pub diagonal: Segment,
}

impl PlaneScene {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scene is always serializable")
    }
}

/// One point per group (labelled `original`), one calibrated line per group,
/// and, for each distinct cost spec, the level curve at the largest group
/// cost. `extra_points` are appended as given.
pub fn build_scene(
    groups: &[GroupData],
    specs: &[CostSpec],
    extra_points: &[ScenePoint],
) -> Result<PlaneScene> {
    if groups.len() != specs.len() {
        return Err(Error::Usage(format!(
            "{} groups but {} cost specs",
            groups.len(),
            specs.len()
        )));
    }
    let mut points = Vec::with_capacity(groups.len() + extra_points.len());
    let mut lines = Vec::with_capacity(groups.len());
    let mut top_cost = f64::NEG_INFINITY;
    for (g, spec) in groups.iter().zip(specs) {
        let rate = g.rates();
        top_cost = top_cost.max(spec.evaluate(rate));
        points.push(ScenePoint::new("original", g.id(), rate));
        let seg = calibrated_line(g.base_rate())?;
        lines.push(SceneLine {
            group: g.id().to_string(),
            x0: seg.x0,
            y0: seg.y0,
            x1: seg.x1,
            y1: seg.y1,
        });
    }
    points.extend_from_slice(extra_points);

    let mut level_curves: Vec<SceneLevelCurve> = Vec::new();
    if top_cost.is_finite() {
        for spec in specs {
            if level_curves.iter().any(|lc| lc.a == spec.a() && lc.b == spec.b()) {
                continue;
            }
            if let Some(seg) = level_curve(spec, top_cost) {
                level_curves.push(SceneLevelCurve {
                    a: spec.a(),
                    b: spec.b(),
                    c: top_cost,
                    x0: seg.x0,
                    y0: seg.y0,
                    x1: seg.x1,
                    y1: seg.y1,
                });
            }
        }
    }

    Ok(PlaneScene {
        points,
        lines,
        level_curves,
        diagonal: trivial_diagonal(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_classifiers_land_on_diagonal() {
        let a = GroupData::from_parts("a", &[0.5; 4], &[0, 1, 1, 0]).unwrap().trivialized();
        let b = GroupData::from_parts("b", &[0.5; 5], &[0, 1, 0, 0, 0]).unwrap().trivialized();
        let spec = CostSpec::new(1.0, 1.0).unwrap();
        let scene = build_scene(&[a, b], &[spec, spec], &[]).unwrap();
        assert_eq!(scene.points.len(), 2);
        for p in &scene.points {
            assert!((p.fp + p.fn_ - 1.0).abs() < 1e-12);
        }
        assert!((scene.points[1].fp - 0.2).abs() < 1e-12);
        assert_eq!(scene.level_curves.len(), 1);
    }

    #[test]
    fn perfect_classifiers_meet_at_origin() {
        let a = GroupData::from_parts("a", &[0.0, 1.0], &[0, 1]).unwrap();
        let b = GroupData::from_parts("b", &[0.0, 1.0, 1.0], &[0, 1, 1]).unwrap();
        let spec = CostSpec::new(2.0, 1.0).unwrap();
        let scene = build_scene(&[a, b], &[spec, spec], &[]).unwrap();
        for p in &scene.points {
            assert_eq!(p.rate(), RatePoint::ORIGIN);
        }
        for l in &scene.lines {
            assert_eq!((l.x0, l.y0), (0.0, 0.0));
        }
    }

    #[test]
    fn json_field_order_is_stable() {
        let a = GroupData::from_parts("a", &[0.2, 0.7], &[0, 1]).unwrap();
        let spec = CostSpec::new(1.0, 1.0).unwrap();
        let scene = build_scene(&[a], &[spec], &[]).unwrap();
        let text = serde_json::to_string(&scene).unwrap();
        let p = text.find("\"points\"").unwrap();
        let l = text.find("\"lines\"").unwrap();
        let c = text.find("\"level_curves\"").unwrap();
        let d = text.find("\"diagonal\"").unwrap();
        assert!(p < l && l < c && c < d);
        assert!(text.contains("\"label\":\"original\",\"group\":\"a\",\"fp\":"));
    }
}
