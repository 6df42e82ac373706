//! Linear group cost functions `g(h) = a * c_fp + b * c_fn` and the
//! FP/FN-plane geometry they induce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RatePoint;

const EDGE_TOL: f64 = 1e-12;

/// Resolved cost coefficients for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    a: f64,
    b: f64,
}

impl CostSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let ok = a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0 && a + b > 0.0;
        if !ok {
            return Err(Error::InvalidCost { a, b });
        }
        Ok(Self { a, b })
    }

    /// Weight on the generalized false-positive rate.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Weight on the generalized false-negative rate.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn evaluate(&self, point: RatePoint) -> f64 {
        self.a * point.c_fp + self.b * point.c_fn
    }
}

/// One cost spec per group; the equal-cost constraint is
/// `group1.evaluate(h1) == group2.evaluate(h2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPair {
    pub group1: CostSpec,
    pub group2: CostSpec,
}

impl CostPair {
    pub fn new(group1: CostSpec, group2: CostSpec) -> Self {
        Self { group1, group2 }
    }

    pub fn uniform(spec: CostSpec) -> Self {
        Self { group1: spec, group2: spec }
    }

    /// `g1(h1) - g2(h2)`.
    pub fn difference(&self, h1: RatePoint, h2: RatePoint) -> f64 {
        self.group1.evaluate(h1) - self.group2.evaluate(h2)
    }

    pub fn swapped(&self) -> Self {
        Self { group1: self.group2, group2: self.group1 }
    }
}

pub fn cost(point: RatePoint, spec: &CostSpec) -> f64 {
    spec.evaluate(point)
}

pub(crate) fn check_open_probability(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OpenUnitInterval { name, value })
    }
}

/// Cost of the constant classifier `h^{mu}`, whose rate point is `(mu, 1 - mu)`.
/// No calibrated classifier for a group with base rate `mu` costs more.
pub fn trivial_cost(mu: f64, spec: &CostSpec) -> Result<f64> {
    check_open_probability("mu", mu)?;
    Ok(spec.evaluate(RatePoint::constant(mu)))
}

/// Coefficient form of the per-sample cost
/// `r_fp * h(x) * (1 - y) + r_fn * (1 - h(x)) * y` averaged over a group with
/// base rate `mu`: `(r_fp * (1 - mu), r_fn * mu)`.
pub fn weighted_cost_spec(r_fp: f64, r_fn: f64, mu: f64) -> Result<CostSpec> {
    check_open_probability("mu", mu)?;
    for (name, value) in [("r_fp", r_fp), ("r_fn", r_fn)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Negative { name, value });
        }
    }
    if r_fp + r_fn <= 0.0 {
        return Err(Error::InvalidCost { a: r_fp, b: r_fn });
    }
    CostSpec::new(r_fp * (1.0 - mu), r_fn * mu)
}

/// A closed segment in the FP/FN plane (x = c_fp, y = c_fn). A single point is
/// a segment with equal endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Segment {
    pub fn new(start: RatePoint, end: RatePoint) -> Self {
        Self {
            x0: start.c_fp,
            y0: start.c_fn,
            x1: end.c_fp,
            y1: end.c_fn,
        }
    }

    pub fn start(&self) -> RatePoint {
        RatePoint::new(self.x0, self.y0)
    }

    pub fn end(&self) -> RatePoint {
        RatePoint::new(self.x1, self.y1)
    }

    pub fn is_point(&self) -> bool {
        self.x0 == self.x1 && self.y0 == self.y1
    }

    /// Slope `dy/dx`; infinite for vertical segments.
    pub fn slope(&self) -> f64 {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }
}

/// The diagonal `c_fp + c_fn = 1` on which every constant classifier lies.
pub fn trivial_diagonal() -> Segment {
    Segment::new(RatePoint::new(0.0, 1.0), RatePoint::new(1.0, 0.0))
}

fn in_unit(v: f64) -> Option<f64> {
    if (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&v) {
        Some(v.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Intersection of `{a * fp + b * fn = c}` with the unit square, or `None`
/// when they do not meet. Endpoints are ordered by increasing `fp`.
pub fn level_curve(spec: &CostSpec, c: f64) -> Option<Segment> {
    let (a, b) = (spec.a, spec.b);
    if !(c.is_finite() && c >= 0.0) {
        return None;
    }
    if b == 0.0 {
        let x = in_unit(c / a)?;
        return Some(Segment::new(RatePoint::new(x, 0.0), RatePoint::new(x, 1.0)));
    }
    if a == 0.0 {
        let y = in_unit(c / b)?;
        return Some(Segment::new(RatePoint::new(0.0, y), RatePoint::new(1.0, y)));
    }

    let mut pts: Vec<RatePoint> = Vec::with_capacity(4);
    // edges x = 0 and x = 1
    if let Some(y) = in_unit(c / b) {
        pts.push(RatePoint::new(0.0, y));
    }
    if let Some(y) = in_unit((c - a) / b) {
        pts.push(RatePoint::new(1.0, y));
    }
    // edges y = 0 and y = 1
    if let Some(x) = in_unit(c / a) {
        pts.push(RatePoint::new(x, 0.0));
    }
    if let Some(x) = in_unit((c - b) / a) {
        pts.push(RatePoint::new(x, 1.0));
    }
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|p, q| p.c_fp.total_cmp(&q.c_fp));
    Some(Segment::new(pts[0], pts[pts.len() - 1]))
}

/// The set of perfectly calibrated classifiers for a group with base rate
/// `mu`: the segment from the origin to `(mu, 1 - mu)` along
/// `fn = ((1 - mu) / mu) * fp`.
pub fn calibrated_line(mu: f64) -> Result<Segment> {
    check_open_probability("mu", mu)?;
    Ok(Segment::new(RatePoint::ORIGIN, RatePoint::constant(mu)))
}

/// Where the level set `{spec = c}` crosses the calibrated line of `mu`.
/// Level sets slope downward and the calibrated line upward, so there is at
/// most one such point; `None` when it falls outside the segment.
pub fn calibrated_point_at_cost(spec: &CostSpec, mu: f64, c: f64) -> Result<Option<RatePoint>> {
    check_open_probability("mu", mu)?;
    // Points on the line are t * (mu, 1 - mu), t in [0, 1], with cost
    // t * trivial_cost.
    let top = trivial_cost(mu, spec)?;
    let t = c / top;
    if !(0.0..=1.0).contains(&t) {
        return Ok(None);
    }
    Ok(Some(RatePoint::new(t * mu, t * (1.0 - mu))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: f64, b: f64) -> CostSpec {
        CostSpec::new(a, b).unwrap()
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(CostSpec::new(0.0, 0.0).is_err());
        assert!(CostSpec::new(-1.0, 1.0).is_err());
        assert!(CostSpec::new(f64::NAN, 1.0).is_err());
        assert!(CostSpec::new(0.0, 2.0).is_ok());
    }

    #[test]
    fn cost_examples() {
        assert!((cost(RatePoint::new(0.2, 0.4), &spec(1.0, 1.0)) - 0.6).abs() < 1e-15);
        assert_eq!(cost(RatePoint::ORIGIN, &spec(3.0, 0.5)), 0.0);
        assert_eq!(cost(RatePoint::new(0.3, 0.7), &spec(1.0, 0.0)), 0.3);
    }

    #[test]
    fn trivial_cost_examples() {
        assert_eq!(trivial_cost(0.3, &spec(1.0, 0.0)).unwrap(), 0.3);
        assert_eq!(trivial_cost(0.5, &spec(1.0, 1.0)).unwrap(), 1.0);
        assert!(trivial_cost(0.0, &spec(1.0, 1.0)).is_err());
        assert!(trivial_cost(1.0, &spec(1.0, 1.0)).is_err());
    }

    #[test]
    fn weighted_specs() {
        let s = weighted_cost_spec(1.0, 3.0, 0.5).unwrap();
        assert_eq!((s.a(), s.b()), (0.5, 1.5));
        let s = weighted_cost_spec(1.0, 0.0, 0.3).unwrap();
        assert!((s.a() - 0.7).abs() < 1e-15);
        assert_eq!(s.b(), 0.0);
        let s = weighted_cost_spec(1.0, 1.0, 0.5).unwrap();
        assert_eq!((s.a(), s.b()), (0.5, 0.5));
        assert!(weighted_cost_spec(0.0, 0.0, 0.5).is_err());
        assert!(weighted_cost_spec(-1.0, 1.0, 0.5).is_err());
        assert!(weighted_cost_spec(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn level_curve_examples() {
        let seg = level_curve(&spec(1.0, 1.0), 1.0).unwrap();
        assert_eq!(seg, Segment::new(RatePoint::new(0.0, 1.0), RatePoint::new(1.0, 0.0)));

        let seg = level_curve(&spec(1.0, 0.0), 0.4).unwrap();
        assert_eq!(seg, Segment::new(RatePoint::new(0.4, 0.0), RatePoint::new(0.4, 1.0)));

        assert!(level_curve(&spec(1.0, 1.0), 3.0).is_none());

        // touches only the corner
        let seg = level_curve(&spec(1.0, 1.0), 2.0).unwrap();
        assert!(seg.is_point());
        assert_eq!(seg.start(), RatePoint::new(1.0, 1.0));

        let seg = level_curve(&spec(1.0, 1.0), 0.0).unwrap();
        assert!(seg.is_point());
    }

    #[test]
    fn calibrated_line_examples() {
        let seg = calibrated_line(0.5).unwrap();
        assert_eq!(seg.end(), RatePoint::new(0.5, 0.5));
        assert_eq!(seg.slope(), 1.0);
        let seg = calibrated_line(0.25).unwrap();
        assert_eq!(seg.end(), RatePoint::new(0.25, 0.75));
        assert!((seg.slope() - 3.0).abs() < 1e-12);
        assert_eq!(seg.x1 + seg.y1, 1.0);
        assert!(calibrated_line(0.0).is_err());
    }

    #[test]
    fn crossing_point_lies_on_both() {
        let s = spec(2.0, 0.5);
        let mu = 0.3;
        let c = 0.4;
        let p = calibrated_point_at_cost(&s, mu, c).unwrap().unwrap();
        assert!((s.evaluate(p) - c).abs() < 1e-12);
        assert!((mu * p.c_fn - (1.0 - mu) * p.c_fp).abs() < 1e-12);
        assert!(calibrated_point_at_cost(&s, mu, 5.0).unwrap().is_none());
    }
}
