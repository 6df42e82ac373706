//! Cost parity with calibration by information withholding.
//!
//! Given calibrated classifiers `h1`, `h2` with `g2(h2) <= g1(h1)`, group 2's
//! classifier is replaced by the mixture
//!
//! ```text
//! h~2(x) = mu2      with probability alpha
//!          h2(x)    with probability 1 - alpha
//! ```
//!
//! whose cost is `(1 - alpha) * g2(h2) + alpha * g2(h^{mu2})`. Choosing
//! `alpha = (g1 - g2) / (g2(h^{mu2}) - g2)` equalizes the costs, and the
//! mixture's calibration gap is at most `(1 - alpha)` times the original one.
//! The instance is feasible exactly when `g2 <= g1 <= g2(h^{mu2})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{check_open_probability, trivial_cost, CostSpec};
use crate::dataset::GroupData;
use crate::error::{Error, Result};
use crate::metrics::{atoms_gap, score_atoms, Atom, RatePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityReason {
    Ok,
    /// `g1 < g2`: the group roles are reversed.
    CostOrderViolated,
    /// `g1` exceeds the cost of group 2's trivial classifier.
    ExceedsTrivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub g1_cost: f64,
    pub g2_cost: f64,
    pub trivial2_cost: f64,
    pub reason: FeasibilityReason,
}

fn check_cost(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Negative { name, value })
    }
}

pub fn feasibility(g1_cost: f64, g2_cost: f64, trivial2_cost: f64) -> Result<FeasibilityVerdict> {
    check_cost("g1_cost", g1_cost)?;
    check_cost("g2_cost", g2_cost)?;
    check_cost("trivial2_cost", trivial2_cost)?;
    let reason = if g2_cost > g1_cost {
        FeasibilityReason::CostOrderViolated
    } else if g1_cost > trivial2_cost {
        FeasibilityReason::ExceedsTrivial
    } else {
        FeasibilityReason::Ok
    };
    Ok(FeasibilityVerdict {
        feasible: reason == FeasibilityReason::Ok,
        g1_cost,
        g2_cost,
        trivial2_cost,
        reason,
    })
}

/// Withholding probability that brings group 2's cost up to `g1_cost`.
pub fn compute_alpha(g1_cost: f64, g2_cost: f64, trivial2_cost: f64) -> Result<f64> {
    let verdict = feasibility(g1_cost, g2_cost, trivial2_cost)?;
    if !verdict.feasible {
        return Err(Error::Infeasible(verdict.reason));
    }
    let denom = trivial2_cost - g2_cost;
    if denom <= 0.0 {
        return Err(Error::AlreadyTrivial);
    }
    Ok(((g1_cost - g2_cost) / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ApplicationMode {
    /// Work with the mixture distribution analytically.
    DeterministicMixture,
    /// Draw the withholding mask per sample.
    MonteCarlo { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPlan {
    alpha: f64,
    trivial_output: f64,
    mode: ApplicationMode,
}

impl InterpolationPlan {
    pub fn new(alpha: f64, trivial_output: f64, mode: ApplicationMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::UnitInterval { name: "alpha", value: alpha });
        }
        check_open_probability("trivial_output", trivial_output)?;
        Ok(Self { alpha, trivial_output, mode })
    }

    /// Plan that withholds towards `g`'s own base rate.
    pub fn for_group(g: &GroupData, alpha: f64, mode: ApplicationMode) -> Result<Self> {
        Self::new(alpha, g.base_rate(), mode)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn trivial_output(&self) -> f64 {
        self.trivial_output
    }

    pub fn mode(&self) -> ApplicationMode {
        self.mode
    }
}

/// Outcome of one randomized withholding pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub group: GroupData,
    /// `true` where the score was replaced by the trivial output.
    pub withheld: Vec<bool>,
}

/// Independently replaces each score by `trivial_output` with probability
/// `alpha`, using one ChaCha20 stream in sample order.
pub fn apply_monte_carlo(g: &GroupData, plan: &InterpolationPlan) -> Result<Realization> {
    let ApplicationMode::MonteCarlo { seed } = plan.mode else {
        return Err(Error::WrongMode);
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let withheld: Vec<bool> = (0..g.len())
        .map(|_| rng.random::<f64>() < plan.alpha)
        .collect();
    let group = g.with_scores(
        g.scores()
            .zip(&withheld)
            .map(|(s, &w)| if w { plan.trivial_output } else { s }),
    )?;
    Ok(Realization { group, withheld })
}

/// A group together with the withholding plan applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureGroup {
    pub base: GroupData,
    pub plan: InterpolationPlan,
    pub realized: Option<Realization>,
}

impl MixtureGroup {
    pub fn new(base: GroupData, plan: InterpolationPlan) -> Result<Self> {
        let realized = match plan.mode {
            ApplicationMode::MonteCarlo { .. } => Some(apply_monte_carlo(&base, &plan)?),
            ApplicationMode::DeterministicMixture => None,
        };
        Ok(Self { base, plan, realized })
    }

    pub fn expected_rates(&self) -> RatePoint {
        mixture_rate_point(&self.base, &self.plan)
    }
}

/// Exact expected rates of the mixture:
/// `(1 - alpha) * rates(g) + alpha * (mu2, 1 - mu2)`.
pub fn mixture_rate_point(g: &GroupData, plan: &InterpolationPlan) -> RatePoint {
    g.rates()
        .lerp(RatePoint::constant(plan.trivial_output), plan.alpha)
}

pub fn mixture_cost(g: &GroupData, plan: &InterpolationPlan, spec: &CostSpec) -> f64 {
    spec.evaluate(mixture_rate_point(g, plan))
}

/// Atoms of the mixture's score distribution. Mass at `trivial_output` pools
/// the surviving original mass there with all withheld mass, whose positive
/// share is the group's base rate.
pub fn mixture_atoms(g: &GroupData, plan: &InterpolationPlan) -> Vec<Atom> {
    let keep = 1.0 - plan.alpha;
    let mut pooled = Atom {
        score: plan.trivial_output,
        weight: plan.alpha,
        positive_weight: plan.alpha * g.base_rate(),
    };
    let mut atoms: Vec<Atom> = Vec::new();
    for a in score_atoms(g.samples()) {
        if a.score == plan.trivial_output {
            pooled.weight += keep * a.weight;
            pooled.positive_weight += keep * a.positive_weight;
        } else {
            atoms.push(Atom {
                score: a.score,
                weight: keep * a.weight,
                positive_weight: keep * a.positive_weight,
            });
        }
    }
    if pooled.weight > 0.0 {
        let at = atoms.partition_point(|a| a.score < pooled.score);
        atoms.insert(at, pooled);
    }
    atoms
}

/// Exact-unique calibration gap of the mixture distribution.
pub fn mixture_calibration_gap(g: &GroupData, plan: &InterpolationPlan) -> f64 {
    atoms_gap(&mixture_atoms(g, plan))
}

/// Verdict of [`optimality_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    /// The candidate claims an improvement that approximate calibration rules out.
    pub flagged: bool,
    pub beats_fp_margin: bool,
    pub beats_fn_margin: bool,
    pub cost_not_lower: bool,
    pub fp_margin: f64,
    pub fn_margin: f64,
}

/// Checks a candidate against a reference classifier, both asserted to have
/// calibration gap at most `delta_cal`. A candidate whose FP rate undercuts
/// the reference by more than `4 delta / (1 - mu)` (or FN by more than
/// `4 delta / mu`) must have strictly lower cost; if its cost is not lower,
/// the pair is flagged.
pub fn optimality_audit(
    candidate: RatePoint,
    reference: RatePoint,
    mu: f64,
    delta_cal: f64,
    spec: &CostSpec,
) -> Result<AuditVerdict> {
    check_open_probability("mu", mu)?;
    check_cost("delta_cal", delta_cal)?;
    let fp_margin = 4.0 * delta_cal / (1.0 - mu);
    let fn_margin = 4.0 * delta_cal / mu;
    let beats_fp_margin = candidate.c_fp < reference.c_fp - fp_margin;
    let beats_fn_margin = candidate.c_fn < reference.c_fn - fn_margin;
    let cost_not_lower = spec.evaluate(candidate) >= spec.evaluate(reference);
    Ok(AuditVerdict {
        flagged: (beats_fp_margin || beats_fn_margin) && cost_not_lower,
        beats_fp_margin,
        beats_fn_margin,
        cost_not_lower,
        fp_margin,
        fn_margin,
    })
}

/// Full withholding run for a reference group 1 and a group 2 to be degraded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithholdingOutcome {
    pub verdict: FeasibilityVerdict,
    /// `None` when infeasible or when group 2 already sits at its trivial cost.
    pub plan: Option<InterpolationPlan>,
    pub post_rates: Option<RatePoint>,
    pub post_cost: Option<f64>,
}

/// Computes costs, the feasibility verdict, and (when feasible) the plan.
/// Does not reorder groups; an order violation is reported in the verdict.
pub fn plan_withholding(
    h1: &GroupData,
    spec1: &CostSpec,
    h2: &GroupData,
    spec2: &CostSpec,
    mode: ApplicationMode,
) -> Result<WithholdingOutcome> {
    let g1 = spec1.evaluate(h1.rates());
    let g2 = spec2.evaluate(h2.rates());
    let triv = trivial_cost(h2.base_rate(), spec2)?;
    let verdict = feasibility(g1, g2, triv)?;
    let alpha = match compute_alpha(g1, g2, triv) {
        Ok(alpha) => alpha,
        Err(Error::Infeasible(_)) | Err(Error::AlreadyTrivial) => {
            return Ok(WithholdingOutcome {
                verdict,
                plan: None,
                post_rates: None,
                post_cost: None,
            })
        }
        Err(e) => return Err(e),
    };
    let plan = InterpolationPlan::for_group(h2, alpha, mode)?;
    let post_rates = mixture_rate_point(h2, &plan);
    Ok(WithholdingOutcome {
        verdict,
        plan: Some(plan),
        post_rates: Some(post_rates),
        post_cost: Some(spec2.evaluate(post_rates)),
    })
}
