//! Equalized Odds baseline: per-group prediction flipping chosen by a small
//! linear program.
//!
//! A score `s >= 0.5` counts as a positive prediction. With probability
//! `q_p2n` a positive prediction is flipped (the score becomes `1 - s`), and
//! with probability `q_n2p` a negative one is. In expectation the flipped
//! score is `(1 - q) * s + q * (1 - s)`, so every generalized rate and the
//! thresholded 0/1 loss are affine in the four flip probabilities.
//!
//! The program minimizes `L(h~1) + L(h~2)` subject to `FP1 = FP2`,
//! `FN1 = FN2` and `q in [0, 1]^4`. It is solved exactly by enumerating the
//! basic points of the feasible polytope: every vertex fixes at least two of
//! the four coordinates at a bound, leaving at most a 2x2 system.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupData, Sample};
use crate::metrics::{atoms_gap, rate_point, score_atoms, RatePoint};

pub const THRESHOLD: f64 = 0.5;

const EQ_TOL: f64 = 1e-11;
const BOX_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipRates {
    pub q_n2p: f64,
    pub q_p2n: f64,
}

impl FlipRates {
    pub const NONE: FlipRates = FlipRates { q_n2p: 0.0, q_p2n: 0.0 };

    pub fn new(q_n2p: f64, q_p2n: f64) -> Self {
        Self { q_n2p, q_p2n }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.q_n2p) && (0.0..=1.0).contains(&self.q_p2n)
    }

    /// Flip probability that applies to a given score.
    #[inline]
    fn for_score(&self, s: f64) -> f64 {
        if s >= THRESHOLD {
            self.q_p2n
        } else {
            self.q_n2p
        }
    }
}

/// Flip probabilities for both groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlipPlan {
    pub group1: FlipRates,
    pub group2: FlipRates,
}

/// Expected score after flipping.
#[inline]
pub fn flip_score(s: f64, flips: &FlipRates) -> f64 {
    let q = flips.for_score(s);
    (1.0 - q) * s + q * (1.0 - s)
}

/// The group with every score replaced by its expected flipped value.
pub fn flipped_group(g: &GroupData, flips: &FlipRates) -> GroupData {
    g.with_scores(g.scores().map(|s| flip_score(s, flips)))
        .expect("flipped scores stay in [0, 1]")
}

/// Generalized rates of the flipped classifier, recomputed from transformed
/// scores.
pub fn derived_rates(g: &GroupData, flips: &FlipRates) -> RatePoint {
    let flipped: Vec<Sample> = g
        .samples()
        .iter()
        .map(|s| Sample {
            score: flip_score(s.score, flips),
            label: s.label,
        })
        .collect();
    rate_point(&flipped).expect("GroupData always holds both classes")
}

/// `L(h) = Pr[pred positive | y = 0] + Pr[pred negative | y = 1]` for the
/// randomized thresholded classifier.
pub fn thresholded_loss(g: &GroupData, flips: &FlipRates) -> f64 {
    let (mut fp, mut fnr) = (0.0, 0.0);
    for s in g.samples() {
        let p_pos = if s.score >= THRESHOLD {
            1.0 - flips.q_p2n
        } else {
            flips.q_n2p
        };
        if s.is_positive() {
            fnr += 1.0 - p_pos;
        } else {
            fp += p_pos;
        }
    }
    fp / g.negatives() as f64 + fnr / g.positives() as f64
}

/// `constant + n2p * q_n2p + p2n * q_p2n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: f64,
    pub n2p: f64,
    pub p2n: f64,
}

impl Affine {
    pub fn eval(&self, q: &FlipRates) -> f64 {
        self.constant + self.n2p * q.q_n2p + self.p2n * q.q_p2n
    }
}

/// A group's FP rate, FN rate and 0/1 loss as affine functions of its flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub fp: Affine,
    pub fnr: Affine,
    pub loss: Affine,
}

impl RateModel {
    pub fn of(g: &GroupData) -> Self {
        let n0 = g.negatives() as f64;
        let n1 = g.positives() as f64;
        let base = g.rates();
        let mut fp = Affine { constant: base.c_fp, n2p: 0.0, p2n: 0.0 };
        let mut fnr = Affine { constant: base.c_fn, n2p: 0.0, p2n: 0.0 };
        // counts of (negatives, positives) predicted (negative, positive)
        let (mut neg_lo, mut neg_hi, mut pos_lo, mut pos_hi) = (0.0, 0.0, 0.0, 0.0);
        for s in g.samples() {
            let slope = 1.0 - 2.0 * s.score;
            match (s.is_positive(), s.score >= THRESHOLD) {
                (false, false) => {
                    fp.n2p += slope / n0;
                    neg_lo += 1.0;
                }
                (false, true) => {
                    fp.p2n += slope / n0;
                    neg_hi += 1.0;
                }
                (true, false) => {
                    fnr.n2p -= slope / n1;
                    pos_lo += 1.0;
                }
                (true, true) => {
                    fnr.p2n -= slope / n1;
                    pos_hi += 1.0;
                }
            }
        }
        let loss = Affine {
            constant: neg_hi / n0 + pos_lo / n1,
            n2p: neg_lo / n0 - pos_lo / n1,
            p2n: pos_hi / n1 - neg_hi / n0,
        };
        Self { fp, fnr, loss }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EoStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EoSolution {
    pub status: EoStatus,
    pub plan: Option<FlipPlan>,
    /// `[group 1, group 2]` rates of the flipped classifiers.
    pub derived_rates: Option<[RatePoint; 2]>,
    pub objective: Option<f64>,
}

impl EoSolution {
    fn infeasible() -> Self {
        Self {
            status: EoStatus::Infeasible,
            plan: None,
            derived_rates: None,
            objective: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Free,
    Lower,
    Upper,
}

fn to_plan(x: &[f64; 4]) -> FlipPlan {
    FlipPlan {
        group1: FlipRates::new(x[0], x[1]),
        group2: FlipRates::new(x[2], x[3]),
    }
}

/// Equalized Odds flips minimizing the summed 0/1 loss.
pub fn solve_eo(g1: &GroupData, g2: &GroupData) -> EoSolution {
    let m1 = RateModel::of(g1);
    let m2 = RateModel::of(g2);

    // Equality rows over x = [q1_n2p, q1_p2n, q2_n2p, q2_p2n].
    let rows = [
        [m1.fp.n2p, m1.fp.p2n, -m2.fp.n2p, -m2.fp.p2n],
        [m1.fnr.n2p, m1.fnr.p2n, -m2.fnr.n2p, -m2.fnr.p2n],
    ];
    let rhs = [
        m2.fp.constant - m1.fp.constant,
        m2.fnr.constant - m1.fnr.constant,
    ];
    let objective = [m1.loss.n2p, m1.loss.p2n, m2.loss.n2p, m2.loss.p2n];
    let obj_const = m1.loss.constant + m2.loss.constant;
    let eval_obj = |x: &[f64; 4]| obj_const + (0..4).map(|j| objective[j] * x[j]).sum::<f64>();
    let residual = |x: &[f64; 4]| -> f64 {
        (0..2)
            .map(|i| ((0..4).map(|j| rows[i][j] * x[j]).sum::<f64>() - rhs[i]).abs())
            .fold(0.0, f64::max)
    };

    let mut best: Option<([f64; 4], f64)> = None;
    let slots = [Slot::Free, Slot::Lower, Slot::Upper];
    for code in 0..81usize {
        let assignment: [Slot; 4] = std::array::from_fn(|j| slots[(code / 3usize.pow(j as u32)) % 3]);
        let free: Vec<usize> = (0..4).filter(|&j| assignment[j] == Slot::Free).collect();
        if free.len() > 2 {
            continue;
        }
        let mut x = [0.0; 4];
        for j in 0..4 {
            x[j] = match assignment[j] {
                Slot::Upper => 1.0,
                _ => 0.0,
            };
        }
        let r: [f64; 2] = std::array::from_fn(|i| {
            rhs[i] - (0..4).filter(|j| !free.contains(j)).map(|j| rows[i][j] * x[j]).sum::<f64>()
        });
        let solved = match free.as_slice() {
            [] => true,
            &[j] => {
                let v = [rows[0][j], rows[1][j]];
                let norm2 = v[0] * v[0] + v[1] * v[1];
                if norm2 <= 1e-24 {
                    false
                } else {
                    x[j] = (v[0] * r[0] + v[1] * r[1]) / norm2;
                    true
                }
            }
            &[j, k] => {
                let det = rows[0][j] * rows[1][k] - rows[0][k] * rows[1][j];
                let scale = rows[0][j].hypot(rows[1][j]) * rows[0][k].hypot(rows[1][k]);
                if det.abs() <= 1e-12 * scale || scale == 0.0 {
                    false
                } else {
                    x[j] = (r[0] * rows[1][k] - rows[0][k] * r[1]) / det;
                    x[k] = (rows[0][j] * r[1] - r[0] * rows[1][j]) / det;
                    true
                }
            }
            _ => unreachable!(),
        };
        if !solved {
            continue;
        }
        if x.iter().any(|&v| !(-BOX_TOL..=1.0 + BOX_TOL).contains(&v)) {
            continue;
        }
        for v in &mut x {
            *v = v.clamp(0.0, 1.0);
        }
        if residual(&x) > EQ_TOL {
            continue;
        }
        let obj = eval_obj(&x);
        let better = match &best {
            None => true,
            Some((bx, bobj)) => {
                obj < bobj - TIE_TOL
                    || (obj <= bobj + TIE_TOL && x.iter().sum::<f64>() < bx.iter().sum::<f64>())
            }
        };
        if better {
            best = Some((x, obj));
        }
    }

    let Some((x, _)) = best else {
        return EoSolution::infeasible();
    };
    let plan = to_plan(&x);
    let r1 = derived_rates(g1, &plan.group1);
    let r2 = derived_rates(g2, &plan.group2);
    EoSolution {
        status: EoStatus::Optimal,
        plan: Some(plan),
        derived_rates: Some([r1, r2]),
        objective: Some(thresholded_loss(g1, &plan.group1) + thresholded_loss(g2, &plan.group2)),
    }
}

/// Exact-unique calibration gap of the expected flipped scores.
pub fn eo_calibration_damage(g: &GroupData, flips: &FlipRates) -> f64 {
    let flipped: Vec<Sample> = g
        .samples()
        .iter()
        .map(|s| Sample {
            score: flip_score(s.score, flips),
            label: s.label,
        })
        .collect();
    atoms_gap(&score_atoms(&flipped))
}
