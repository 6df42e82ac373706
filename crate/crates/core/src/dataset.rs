//! Grouped probabilistic predictions: the `(score, label)` data model, CSV
//! ingestion, and seeded synthetic generators.
//!
//! The CSV schema is fixed: a mandatory `group,score,label` header followed by
//! one row per sample. Groups are returned in order of first appearance and
//! keep their rows in file order.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["group", "score", "label"];

/// One classifier output `h(x)` together with its true binary outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub score: f64,
    pub label: u8,
}

impl Sample {
    pub fn new(score: f64, label: u8) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::ScoreOutOfRange(score));
        }
        if label > 1 {
            return Err(Error::NonBinaryLabel(label.into()));
        }
        Ok(Self { score, label })
    }

    #[inline]
    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// All samples of one group `G_t`, with its base rate cached.
///
/// Construction guarantees a non-empty sample list containing both classes,
/// so `0 < base_rate < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupData {
    id: String,
    samples: Vec<Sample>,
    positives: usize,
    base_rate: f64,
}

impl GroupData {
    pub fn new(id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::EmptyGroup(id));
        }
        for s in &samples {
            Sample::new(s.score, s.label)?;
        }
        let positives = samples.iter().filter(|s| s.is_positive()).count();
        let base_rate = positives as f64 / samples.len() as f64;
        if positives == 0 || positives == samples.len() {
            return Err(Error::SingleClass { group: id, base_rate });
        }
        Ok(Self {
            id,
            samples,
            positives,
            base_rate,
        })
    }

    /// Builds a group from parallel score and label slices.
    pub fn from_parts(id: impl Into<String>, scores: &[f64], labels: &[u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Usage(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        let samples = scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| Sample::new(s, l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(id, samples)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn negatives(&self) -> usize {
        self.samples.len() - self.positives
    }

    /// Empirical `Pr[y = 1]` within the group.
    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.score)
    }

    /// Same labels, new scores (one per sample, in order).
    pub fn with_scores<I>(&self, scores: I) -> Result<Self>
    where
        I: IntoIterator<Item = f64>,
    {
        let samples = self
            .samples
            .iter()
            .zip(scores)
            .map(|(s, score)| Sample::new(score, s.label))
            .collect::<Result<Vec<_>>>()?;
        if samples.len() != self.samples.len() {
            return Err(Error::Usage("score count does not match sample count".into()));
        }
        Ok(Self {
            id: self.id.clone(),
            samples,
            positives: self.positives,
            base_rate: self.base_rate,
        })
    }

    /// The constant classifier `h^{mu}` on this group: every score replaced by
    /// the base rate.
    pub fn trivialized(&self) -> Self {
        let mu = self.base_rate;
        Self {
            id: self.id.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample { score: mu, label: s.label })
                .collect(),
            positives: self.positives,
            base_rate: mu,
        }
    }

    pub fn renamed(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Empirical base rate of a group.
pub fn base_rate(g: &GroupData) -> f64 {
    g.base_rate()
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<GroupData>> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<GroupData>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    if headers.len() != CSV_HEADER.len() || headers.iter().zip(CSV_HEADER).any(|(h, e)| h != e) {
        return Err(Error::Row {
            row: 1,
            message: format!(
                "expected header `group,score,label`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut buckets: std::collections::HashMap<String, Vec<Sample>> = Default::default();
    for (idx, record) in rdr.records().enumerate() {
        // header is line 1
        let row = idx as u64 + 2;
        let record = record.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Row {
                row,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let group = record[0].to_string();
        let score: f64 = record[1].parse().map_err(|_| Error::Row {
            row,
            message: format!("unparseable score `{}`", &record[1]),
        })?;
        let label: i64 = record[2].parse().map_err(|_| Error::Row {
            row,
            message: format!("unparseable label `{}`", &record[2]),
        })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Row {
                row,
                message: Error::ScoreOutOfRange(score).to_string(),
            });
        }
        if label != 0 && label != 1 {
            return Err(Error::Row {
                row,
                message: Error::NonBinaryLabel(label).to_string(),
            });
        }
        let bucket = buckets.entry(group.clone()).or_insert_with(|| {
            order.push(group);
            Vec::new()
        });
        bucket.push(Sample {
            score,
            label: label as u8,
        });
    }

    order
        .into_iter()
        .map(|id| {
            let samples = buckets.remove(&id).unwrap_or_default();
            GroupData::new(id, samples)
        })
        .collect()
}

/// Writes groups back out in the ingestion schema. Scores use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(groups: &[GroupData], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for g in groups {
        for s in g.samples() {
            wtr.write_record([g.id(), &s.score.to_string(), &s.label.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Score family for the synthetic generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDistribution {
    PointMass(f64),
    /// Uniform over the listed support points.
    UniformGrid(Vec<f64>),
    Beta { alpha: f64, beta: f64 },
}

impl ScoreDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            Self::PointMass(p) => check_support(&[*p]),
            Self::UniformGrid(points) => {
                if points.is_empty() {
                    return Err(Error::InvalidSynth("empty grid".into()));
                }
                check_support(points)
            }
            Self::Beta { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && *alpha > 0.0 && *beta > 0.0) {
                    return Err(Error::InvalidSynth(format!(
                        "beta parameters ({alpha}, {beta}) must be positive"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Discrete support, if the family has one.
    pub fn support(&self) -> Option<&[f64]> {
        match self {
            Self::PointMass(p) => Some(std::slice::from_ref(p)),
            Self::UniformGrid(points) => Some(points),
            Self::Beta { .. } => None,
        }
    }
}

fn check_support(points: &[f64]) -> Result<()> {
    match points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(p) => Err(Error::InvalidSynth(format!("support point {p} outside [0, 1]"))),
        None => Ok(()),
    }
}

impl FromStr for ScoreDistribution {
    type Err = Error;

    /// `point:P`, `grid:P1,P2,...` or `beta:A,B`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSynth(format!("expected KIND:PARAMS, got `{s}`")))?;
        let nums = params
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidSynth(format!("bad number `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let dist = match (kind, nums.as_slice()) {
            ("point", [p]) => Self::PointMass(*p),
            ("grid", pts) if !pts.is_empty() => Self::UniformGrid(pts.to_vec()),
            ("beta", [a, b]) => Self::Beta { alpha: *a, beta: *b },
            _ => return Err(Error::InvalidSynth(format!("unrecognized distribution `{s}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl fmt::Display for ScoreDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PointMass(p) => write!(f, "point:{p}"),
            Self::UniformGrid(pts) => {
                let joined: Vec<String> = pts.iter().map(|p| p.to_string()).collect();
                write!(f, "grid:{}", joined.join(","))
            }
            Self::Beta { alpha, beta } => write!(f, "beta:{alpha},{beta}"),
        }
    }
}

/// Parameters for a synthetic group. Labels are drawn as
/// `Bernoulli(clamp(score + miscalibration_shift))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub group_id: String,
    pub n: usize,
    pub score_distribution: ScoreDistribution,
    pub miscalibration_shift: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(group_id: impl Into<String>, n: usize, dist: ScoreDistribution, seed: u64) -> Self {
        Self {
            group_id: group_id.into(),
            n,
            score_distribution: dist,
            miscalibration_shift: 0.0,
            seed,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.miscalibration_shift = shift;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSynth("n must be at least 1".into()));
        }
        if !self.miscalibration_shift.is_finite() || self.miscalibration_shift.abs() >= 1.0 {
            return Err(Error::InvalidSynth(format!(
                "shift {} must lie in (-1, 1)",
                self.miscalibration_shift
            )));
        }
        self.score_distribution.validate()?;
        // Both classes must be possible: some support point with label
        // probability above 0, and some below 1.
        if let Some(support) = self.score_distribution.support() {
            let probs: Vec<f64> = support.iter().map(|&p| self.label_probability(p)).collect();
            let can_pos = probs.iter().any(|&q| q > 0.0);
            let can_neg = probs.iter().any(|&q| q < 1.0);
            if !(can_pos && can_neg) {
                return Err(Error::InvalidSynth(
                    "every label probability is 0 or every one is 1; only one class can occur".into(),
                ));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn label_probability(&self, score: f64) -> f64 {
        (score + self.miscalibration_shift).clamp(0.0, 1.0)
    }

    /// Population calibration gap `E|Pr[y=1|p] - p|` of the generating
    /// process. Only available for discrete score families.
    pub fn population_calibration_gap(&self) -> Option<f64> {
        let support = self.score_distribution.support()?;
        let total: f64 = support
            .iter()
            .map(|&p| (self.label_probability(p) - p).abs())
            .sum();
        Some(total / support.len() as f64)
    }
}

fn generate(spec: &SynthSpec) -> Result<GroupData> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let beta = match spec.score_distribution {
        ScoreDistribution::Beta { alpha, beta } => {
            Some(Beta::new(alpha, beta).map_err(|e| Error::InvalidSynth(e.to_string()))?)
        }
        _ => None,
    };
    let mut samples = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let score = match &spec.score_distribution {
            ScoreDistribution::PointMass(p) => *p,
            ScoreDistribution::UniformGrid(pts) => pts[rng.random_range(0..pts.len())],
            ScoreDistribution::Beta { .. } => {
                beta.as_ref().map(|d| d.sample(&mut rng)).unwrap_or(0.5)
            }
        };
        let u: f64 = rng.random();
        let label = u8::from(u < spec.label_probability(score));
        samples.push(Sample { score, label });
    }
    GroupData::new(spec.group_id.clone(), samples)
}

/// Draws `score ~ distribution`, then `label ~ Bernoulli(score)`.
/// Deterministic for a fixed spec and seed.
pub fn synth_calibrated(spec: &SynthSpec) -> Result<GroupData> {
    if spec.miscalibration_shift != 0.0 {
        return Err(Error::InvalidSynth(
            "synth_calibrated requires miscalibration_shift = 0".into(),
        ));
    }
    generate(spec)
}

/// Like [`synth_calibrated`] but with labels drawn from the shifted (and
/// clamped) probability. A zero shift reproduces the calibrated generator.
pub fn synth_miscalibrated(spec: &SynthSpec) -> Result<GroupData> {
    generate(spec)
}
