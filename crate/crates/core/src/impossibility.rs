//! Impossibility diagnostics for calibration plus two equal-cost constraints.
//!
//! With `q = [FP1, FN1, FP2, FN2]`, calibration and two equal-cost constraints
//! are the rows of
//!
//! ```text
//!     [ 1   -mu1/(1-mu1)   0    0           ]
//! A = [ 0    0             1   -mu2/(1-mu2) ]
//!     [ a1   b1           -a2  -b2          ]
//!     [ a1'  b1'          -a2' -b2'         ]
//! ```
//!
//! When `mu1 != mu2` and the two cost constraints are distinct, `A q = 0`
//! forces `q = 0`. If the rows only hold up to slack (calibration gap
//! `delta_cal`, cost difference `delta_cost`) and the entries of `A` are
//! rationals with common denominator `D` and magnitude at most `M`, every
//! rate is bounded by `16 M^3 D^4 * max{2 delta_cal/(1-mu1),
//! 2 delta_cal/(1-mu2), delta_cost}`.

use serde::{Deserialize, Serialize};

use crate::cost::{check_open_probability, CostPair};
use crate::dataset::GroupData;
use crate::error::{Error, Result};
use crate::metrics::RatePoint;

/// Pivot tolerance for the distinctness test.
pub const PIVOT_TOL: f64 = 1e-12;

/// Smallest tolerance accepted by [`exact_impossibility_check`].
pub const MIN_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMatrix {
    pub rows: [[f64; 4]; 4],
    pub mu1: f64,
    pub mu2: f64,
    /// Rows 3 and 4 are linearly independent.
    pub distinct: bool,
}

impl ConstraintMatrix {
    /// `A q` for the stacked rate vector of two classifiers.
    pub fn apply(&self, h1: RatePoint, h2: RatePoint) -> [f64; 4] {
        let q = [h1.c_fp, h1.c_fn, h2.c_fp, h2.c_fn];
        self.rows
            .map(|row| row.iter().zip(&q).map(|(a, x)| a * x).sum())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Determinant by cofactor expansion.
    pub fn determinant(&self) -> f64 {
        det4(&self.rows)
    }
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    (0..4)
        .map(|col| {
            let minor: [[f64; 3]; 3] = std::array::from_fn(|i| {
                let mut row = [0.0; 3];
                let mut k = 0;
                for (j, v) in m[i + 1].iter().enumerate() {
                    if j != col {
                        row[k] = *v;
                        k += 1;
                    }
                }
                row
            });
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][col] * det3(minor)
        })
        .sum()
}

/// Rank of a 2x4 block by elimination with partial pivoting.
fn rank_2x4(r0: [f64; 4], r1: [f64; 4]) -> usize {
    let (p, _) = r0
        .iter()
        .chain(&r1)
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let pivot_row = if p < 4 { r0 } else { r1 };
    let other = if p < 4 { r1 } else { r0 };
    let col = p % 4;
    if pivot_row[col].abs() <= PIVOT_TOL {
        return 0;
    }
    let factor = other[col] / pivot_row[col];
    let reduced_max = (0..4)
        .map(|j| (other[j] - factor * pivot_row[j]).abs())
        .fold(0.0, f64::max);
    if reduced_max <= PIVOT_TOL {
        1
    } else {
        2
    }
}

fn cost_row(pair: &CostPair) -> [f64; 4] {
    [pair.group1.a(), pair.group1.b(), -pair.group2.a(), -pair.group2.b()]
}

pub fn build_matrix(mu1: f64, mu2: f64, pair: &CostPair, pair_prime: &CostPair) -> Result<ConstraintMatrix> {
    check_open_probability("mu1", mu1)?;
    check_open_probability("mu2", mu2)?;
    let r2 = cost_row(pair);
    let r3 = cost_row(pair_prime);
    Ok(ConstraintMatrix {
        rows: [
            [1.0, -mu1 / (1.0 - mu1), 0.0, 0.0],
            [0.0, 0.0, 1.0, -mu2 / (1.0 - mu2)],
            r2,
            r3,
        ],
        mu1,
        mu2,
        distinct: rank_2x4(r2, r3) == 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactVerdict {
    /// All four constraint residuals are within `tol`.
    pub satisfied: bool,
    pub tol: f64,
    pub rates: [RatePoint; 2],
    /// `|A q|`, row by row.
    pub residuals: [f64; 4],
    /// Largest of the four rates; small whenever `satisfied` with small `tol`.
    pub max_rate: f64,
}

/// Evaluates the calibration rows and both equal-cost rows of `A` on the two
/// groups' rate points.
pub fn exact_impossibility_check(
    g1: &GroupData,
    g2: &GroupData,
    pair: &CostPair,
    pair_prime: &CostPair,
    tol: f64,
) -> Result<ExactVerdict> {
    if tol.is_nan() || tol < MIN_CHECK_TOL {
        return Err(Error::Usage(format!(
            "tolerance {tol} is below the floating-point floor {MIN_CHECK_TOL}"
        )));
    }
    let (mu1, mu2) = (g1.base_rate(), g2.base_rate());
    if mu1 == mu2 {
        return Err(Error::EqualBaseRates(mu1));
    }
    let matrix = build_matrix(mu1, mu2, pair, pair_prime)?;
    if !matrix.distinct {
        return Err(Error::NonDistinctConstraints);
    }
    let rates = [g1.rates(), g2.rates()];
    let residuals = matrix.apply(rates[0], rates[1]).map(f64::abs);
    Ok(ExactVerdict {
        satisfied: residuals.iter().all(|&r| r <= tol),
        tol,
        rates,
        residuals,
        max_rate: rates[0].max_component().max(rates[1].max_component()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityBound {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "D")]
    pub d: u64,
    #[serde(rename = "L")]
    pub l: f64,
    pub delta_cal: f64,
    pub delta_cost: f64,
    pub rate_bound: f64,
}

impl ImpossibilityBound {
    /// Whether every generalized rate of both classifiers is within the bound.
    pub fn admits(&self, h1: RatePoint, h2: RatePoint) -> bool {
        h1.max_component().max(h2.max_component()) <= self.rate_bound
    }
}

/// `L = 16 M^3 D^4` and the resulting uniform bound on all four rates.
///
/// `m` and `d` are the caller's assertion about the exact constraint system
/// (entries rational with common denominator `d`, magnitude at most `m`);
/// neither can be recovered from floating-point entries. `m` is checked
/// against the stored entries.
pub fn approximate_bound(
    matrix: &ConstraintMatrix,
    delta_cal: f64,
    delta_cost: f64,
    m: f64,
    d: u64,
) -> Result<ImpossibilityBound> {
    if d == 0 {
        return Err(Error::BoundHypothesis("common denominator D must be positive".into()));
    }
    if !matrix.distinct {
        return Err(Error::NonDistinctConstraints);
    }
    for (name, value) in [("delta_cal", delta_cal), ("delta_cost", delta_cost), ("M", m)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Negative { name, value });
        }
    }
    let largest = matrix.max_abs_entry();
    if m < largest * (1.0 - 1e-12) {
        return Err(Error::BoundHypothesis(format!(
            "M = {m} is below the largest entry magnitude {largest}"
        )));
    }
    let l = 16.0 * m.powi(3) * (d as f64).powi(4);
    let slack = (2.0 * delta_cal / (1.0 - matrix.mu1))
        .max(2.0 * delta_cal / (1.0 - matrix.mu2))
        .max(delta_cost);
    Ok(ImpossibilityBound {
        m,
        d,
        l,
        delta_cal,
        delta_cost,
        rate_bound: l * slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostSpec;

    fn spec(a: f64, b: f64) -> CostSpec {
        CostSpec::new(a, b).unwrap()
    }

    #[test]
    fn matrix_layout() {
        let fp_only = CostPair::uniform(spec(1.0, 0.0));
        let fn_only = CostPair::uniform(spec(0.0, 1.0));
        let m = build_matrix(0.5, 0.5, &fp_only, &fn_only).unwrap();
        assert_eq!(
            m.rows,
            [
                [1.0, -1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, -1.0],
                [1.0, 0.0, -1.0, 0.0],
                [0.0, 1.0, 0.0, -1.0],
            ]
        );
        assert!(m.distinct);
        // equal base rates leave A singular
        assert!(m.determinant().abs() < 1e-15);

        let m = build_matrix(0.25, 0.5, &fp_only, &fp_only).unwrap();
        assert!(!m.distinct);
        assert!((m.rows[0][1] + 1.0 / 3.0).abs() < 1e-15);

        let m = build_matrix(0.25, 0.5, &fp_only, &fn_only).unwrap();
        assert!(m.determinant().abs() > 1e-6);
        assert!(build_matrix(0.0, 0.5, &fp_only, &fn_only).is_err());
    }

    #[test]
    fn scaled_rows_are_not_distinct() {
        let p = CostPair::new(spec(1.0, 2.0), spec(0.5, 1.0));
        let q = CostPair::new(spec(2.0, 4.0), spec(1.0, 2.0));
        assert!(!build_matrix(0.2, 0.6, &p, &q).unwrap().distinct);
    }

    #[test]
    fn bound_constant() {
        let m = build_matrix(
            0.5,
            0.25,
            &CostPair::uniform(spec(1.0, 0.0)),
            &CostPair::uniform(spec(0.0, 1.0)),
        )
        .unwrap();
        let b = approximate_bound(&m, 0.0, 0.0, 1.0, 2).unwrap();
        assert_eq!(b.l, 256.0);
        assert_eq!(b.rate_bound, 0.0);
        let b = approximate_bound(&m, 0.001, 0.002, 1.0, 3).unwrap();
        assert_eq!(b.l, 16.0 * 81.0);
        assert!((b.rate_bound - b.l * 0.004).abs() < 1e-12);
        assert!(approximate_bound(&m, 0.0, 0.0, 1.0, 0).is_err());
        assert!(approximate_bound(&m, 0.0, 0.0, 0.5, 2).is_err());
    }

    #[test]
    fn perfect_classifiers_satisfy_everything() {
        let g1 = GroupData::from_parts("a", &[0.0, 1.0, 0.0, 0.0], &[0, 1, 0, 0]).unwrap();
        let g2 = GroupData::from_parts("b", &[0.0, 1.0], &[0, 1]).unwrap();
        let v = exact_impossibility_check(
            &g1,
            &g2,
            &CostPair::uniform(spec(1.0, 0.0)),
            &CostPair::uniform(spec(0.0, 1.0)),
            1e-9,
        )
        .unwrap();
        assert!(v.satisfied);
        assert_eq!(v.max_rate, 0.0);
    }

    #[test]
    fn check_rejects_bad_inputs() {
        let g1 = GroupData::from_parts("a", &[0.5, 0.5], &[0, 1]).unwrap();
        let g2 = GroupData::from_parts("b", &[0.2, 0.8], &[0, 1]).unwrap();
        let p = CostPair::uniform(spec(1.0, 1.0));
        let q = CostPair::uniform(spec(1.0, 0.0));
        assert!(matches!(exact_impossibility_check(&g1, &g2, &p, &q, 1e-6), Err(Error::EqualBaseRates(_))));
        let g2 = GroupData::from_parts("b", &[0.2, 0.8, 0.1], &[0, 1, 0]).unwrap();
        assert!(matches!(exact_impossibility_check(&g1, &g2, &p, &p, 1e-6), Err(Error::NonDistinctConstraints)));
        assert!(exact_impossibility_check(&g1, &g2, &p, &q, 0.0).is_err());
    }
}
