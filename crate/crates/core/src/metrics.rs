//! Generalized error rates, calibration gap, and the closed-form rates that
//! hold for calibrated classifiers.
//!
//! Rates here are the *generalized* ones: the false-positive rate is the mean
//! score over negatives and the false-negative rate is the mean of `1 - score`
//! over positives. For 0/1 outputs they reduce to the usual FP/FN rates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupData, Sample};
use crate::error::{Error, Result};

/// A classifier's position in the generalized FP/FN plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub c_fp: f64,
    pub c_fn: f64,
}

impl RatePoint {
    pub const ORIGIN: RatePoint = RatePoint { c_fp: 0.0, c_fn: 0.0 };

    pub fn new(c_fp: f64, c_fn: f64) -> Self {
        Self { c_fp, c_fn }
    }

    /// Rate point of the constant classifier that always outputs `p`.
    pub fn constant(p: f64) -> Self {
        Self { c_fp: p, c_fn: 1.0 - p }
    }

    /// `(1 - t) * self + t * other`, component-wise.
    pub fn lerp(self, other: RatePoint, t: f64) -> Self {
        Self {
            c_fp: (1.0 - t) * self.c_fp + t * other.c_fp,
            c_fn: (1.0 - t) * self.c_fn + t * other.c_fn,
        }
    }

    pub fn max_component(&self) -> f64 {
        self.c_fp.max(self.c_fn)
    }
}

pub fn generalized_fp(samples: &[Sample]) -> Result<f64> {
    let (sum, count) = samples
        .iter()
        .filter(|s| !s.is_positive())
        .fold((0.0, 0usize), |(acc, n), s| (acc + s.score, n + 1));
    if count == 0 {
        return Err(Error::NoNegatives);
    }
    Ok(sum / count as f64)
}

pub fn generalized_fn(samples: &[Sample]) -> Result<f64> {
    let (sum, count) = samples
        .iter()
        .filter(|s| s.is_positive())
        .fold((0.0, 0usize), |(acc, n), s| (acc + (1.0 - s.score), n + 1));
    if count == 0 {
        return Err(Error::NoPositives);
    }
    Ok(sum / count as f64)
}

pub fn rate_point(samples: &[Sample]) -> Result<RatePoint> {
    Ok(RatePoint {
        c_fp: generalized_fp(samples)?,
        c_fn: generalized_fn(samples)?,
    })
}

impl GroupData {
    /// Generalized `(c_fp, c_fn)`; infallible because groups hold both classes.
    pub fn rates(&self) -> RatePoint {
        rate_point(self.samples()).expect("GroupData always holds both classes")
    }
}

/// How scores are grouped when estimating the calibration gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Every distinct score value is its own atom.
    #[default]
    ExactUnique,
    /// `B` equal-width bins over `[0, 1]`; the last bin is closed.
    FixedWidth(usize),
}

impl FromStr for Binning {
    type Err = Error;

    /// `exact` or `fixed:B`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" || s == "exact-unique" {
            return Ok(Binning::ExactUnique);
        }
        if let Some(b) = s.strip_prefix("fixed:") {
            let bins: usize = b
                .parse()
                .map_err(|_| Error::InvalidBinning(format!("bad bin count `{b}`")))?;
            if bins == 0 {
                return Err(Error::InvalidBinning("bin count must be at least 1".into()));
            }
            return Ok(Binning::FixedWidth(bins));
        }
        Err(Error::InvalidBinning(format!("expected `exact` or `fixed:B`, got `{s}`")))
    }
}

impl fmt::Display for Binning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binning::ExactUnique => f.write_str("exact"),
            Binning::FixedWidth(b) => write!(f, "fixed:{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub mean_score: f64,
    pub positive_fraction: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub gap: f64,
    pub bin_edges: Vec<f64>,
    pub bins: Vec<BinStat>,
}

/// A weighted mass point of a score distribution: total probability `weight`
/// sits at `score`, of which `positive_weight` belongs to `y = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub score: f64,
    pub weight: f64,
    pub positive_weight: f64,
}

impl Atom {
    pub fn positive_fraction(&self) -> f64 {
        if self.weight > 0.0 {
            self.positive_weight / self.weight
        } else {
            0.0
        }
    }
}

/// Collapses samples into one atom per distinct score, sorted by score.
pub fn score_atoms(samples: &[Sample]) -> Vec<Atom> {
    let n = samples.len() as f64;
    let mut sorted: Vec<Sample> = samples.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut atoms: Vec<(f64, usize, usize)> = Vec::new();
    for s in &sorted {
        match atoms.last_mut() {
            // 0.0 == -0.0 here, which is what we want.
            Some((score, count, pos)) if *score == s.score => {
                *count += 1;
                *pos += usize::from(s.is_positive());
            }
            _ => atoms.push((s.score, 1, usize::from(s.is_positive()))),
        }
    }
    atoms
        .into_iter()
        .map(|(score, count, pos)| Atom {
            score,
            weight: count as f64 / n,
            positive_weight: pos as f64 / n,
        })
        .collect()
}

/// `sum_atoms weight * |positive fraction - score|`.
pub fn atoms_gap(atoms: &[Atom]) -> f64 {
    atoms
        .iter()
        .map(|a| (a.positive_weight - a.score * a.weight).abs())
        .sum()
}

pub fn calibration_gap(samples: &[Sample], binning: Binning) -> Result<CalibrationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyGroup(String::new()));
    }
    match binning {
        Binning::ExactUnique => {
            let atoms = score_atoms(samples);
            let gap = atoms_gap(&atoms);
            Ok(CalibrationReport {
                gap,
                bin_edges: atoms.iter().map(|a| a.score).collect(),
                bins: atoms
                    .iter()
                    .map(|a| BinStat {
                        mean_score: a.score,
                        positive_fraction: a.positive_fraction(),
                        weight: a.weight,
                    })
                    .collect(),
            })
        }
        Binning::FixedWidth(0) => Err(Error::InvalidBinning("bin count must be at least 1".into())),
        Binning::FixedWidth(b) => {
            let n = samples.len() as f64;
            let mut sums = vec![(0.0f64, 0usize, 0usize); b];
            for s in samples {
                let idx = ((s.score * b as f64) as usize).min(b - 1);
                let slot = &mut sums[idx];
                slot.0 += s.score;
                slot.1 += 1;
                slot.2 += usize::from(s.is_positive());
            }
            let bins: Vec<BinStat> = sums
                .iter()
                .filter(|(_, count, _)| *count > 0)
                .map(|&(sum, count, pos)| BinStat {
                    mean_score: sum / count as f64,
                    positive_fraction: pos as f64 / count as f64,
                    weight: count as f64 / n,
                })
                .collect();
            let gap = bins
                .iter()
                .map(|bin| (bin.positive_fraction - bin.mean_score).abs() * bin.weight)
                .sum();
            Ok(CalibrationReport {
                gap,
                bin_edges: (0..=b).map(|k| k as f64 / b as f64).collect(),
                bins,
            })
        }
    }
}

impl GroupData {
    /// Calibration gap with exact-unique binning.
    pub fn calibration_gap(&self) -> f64 {
        atoms_gap(&score_atoms(self.samples()))
    }
}

fn base_rate_of(samples: &[Sample]) -> Result<f64> {
    let pos = samples.iter().filter(|s| s.is_positive()).count();
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    if pos == samples.len() {
        return Err(Error::NoNegatives);
    }
    Ok(pos as f64 / samples.len() as f64)
}

/// Rates predicted from raw score moments, `((E[h]-E[h^2])/(1-mu),
/// (E[h]-E[h^2])/mu)`. These equal the true rates only for calibrated scores.
pub fn analytic_rates(samples: &[Sample]) -> Result<RatePoint> {
    let mu = base_rate_of(samples)?;
    let n = samples.len() as f64;
    let m1: f64 = samples.iter().map(|s| s.score).sum::<f64>() / n;
    let m2: f64 = samples.iter().map(|s| s.score * s.score).sum::<f64>() / n;
    let spread = m1 - m2;
    Ok(RatePoint {
        c_fp: spread / (1.0 - mu),
        c_fn: spread / mu,
    })
}

/// `|mu * c_fn - (1 - mu) * c_fp|`, zero for perfectly calibrated scores and
/// at most twice the calibration gap in general.
pub fn linearity_residual(samples: &[Sample]) -> Result<f64> {
    let mu = base_rate_of(samples)?;
    let rp = rate_point(samples)?;
    Ok((mu * rp.c_fn - (1.0 - mu) * rp.c_fp).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(scores: &[f64], labels: &[u8]) -> Vec<Sample> {
        scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| Sample::new(s, l).unwrap())
            .collect()
    }

    #[test]
    fn fp_and_fn_basic() {
        assert_eq!(generalized_fp(&samples(&[0.2, 0.8], &[0, 0])).unwrap(), 0.5);
        assert!((generalized_fn(&samples(&[0.2, 0.9], &[1, 1])).unwrap() - 0.45).abs() < 1e-15);
        assert!(matches!(generalized_fp(&samples(&[0.2], &[1])), Err(Error::NoNegatives)));
        assert!(matches!(generalized_fn(&samples(&[0.2], &[0])), Err(Error::NoPositives)));
    }

    #[test]
    fn perfect_classifier_sits_at_origin() {
        let s = samples(&[0.0, 1.0, 1.0, 0.0], &[0, 1, 1, 0]);
        assert_eq!(rate_point(&s).unwrap(), RatePoint::ORIGIN);
        assert_eq!(analytic_rates(&s).unwrap(), RatePoint::ORIGIN);
    }

    #[test]
    fn trivial_classifier_on_diagonal() {
        let g = GroupData::from_parts("g", &[0.9; 10], &[1, 1, 1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let t = g.trivialized();
        let rp = t.rates();
        assert!((rp.c_fp - 0.3).abs() < 1e-12);
        assert!((rp.c_fn - 0.7).abs() < 1e-12);
        assert!((rp.c_fp + rp.c_fn - 1.0).abs() < 1e-12);
        assert!(linearity_residual(t.samples()).unwrap() < 1e-12);
        assert!(t.calibration_gap() < 1e-12);
    }

    #[test]
    fn analytic_rates_of_constant_scores() {
        let s = samples(&[0.3; 10], &[1, 1, 1, 0, 0, 0, 0, 0, 0, 0]);
        let rp = analytic_rates(&s).unwrap();
        assert!((rp.c_fp - 0.3).abs() < 1e-12);
        assert!((rp.c_fn - 0.7).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        // score 0.25 with 1/4 positives, 0.5 with 1/2, 0.75 with 3/4
        let s = samples(
            &[0.25, 0.25, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 0.75, 0.75],
            &[1, 0, 0, 0, 1, 0, 1, 1, 1, 0],
        );
        let report = calibration_gap(&s, Binning::ExactUnique).unwrap();
        assert!(report.gap.abs() < 1e-12);
        assert_eq!(report.bins.len(), 3);
        assert!((report.bins.iter().map(|b| b.weight).sum::<f64>() - 1.0).abs() < 1e-12);

        let s = samples(&[0.5, 0.5, 0.5], &[1, 1, 1]);
        let report = calibration_gap(&s, Binning::ExactUnique).unwrap();
        assert!((report.gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_width_bins() {
        let s = samples(&[0.05, 0.15, 0.95, 1.0], &[0, 0, 1, 1]);
        let report = calibration_gap(&s, Binning::FixedWidth(10)).unwrap();
        assert_eq!(report.bin_edges.len(), 11);
        assert_eq!(report.bins.len(), 3);
        // last bin pools 0.95 and 1.0
        let last = report.bins.last().unwrap();
        assert!((last.mean_score - 0.975).abs() < 1e-12);
        assert_eq!(last.weight, 0.5);
        let expected = 0.25 * 0.05 + 0.25 * 0.15 + 0.5 * 0.025;
        assert!((report.gap - expected).abs() < 1e-12);
        assert!(calibration_gap(&s, Binning::FixedWidth(0)).is_err());
    }

    #[test]
    fn residual_of_symmetric_case() {
        let s = samples(&[0.5, 0.5], &[0, 1]);
        assert!(linearity_residual(&s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn binning_parse() {
        assert_eq!("exact".parse::<Binning>().unwrap(), Binning::ExactUnique);
        assert_eq!("fixed:10".parse::<Binning>().unwrap(), Binning::FixedWidth(10));
        assert!("fixed:0".parse::<Binning>().is_err());
        assert!("quantile".parse::<Binning>().is_err());
    }
}
