//! Calibration-preserving cost parity for probabilistic binary classifiers.
//!
//! Two groups, each with a calibrated classifier, are brought to equal cost
//! under a linear cost `g_t(h) = a_t * c_fp + b_t * c_fn` by randomly
//! withholding predictions (substituting the base rate) for the cheaper
//! group. The crate also ships the Equalized Odds flip baseline, the
//! calibration and rate metrics both rely on, and diagnostics for the
//! impossibility of satisfying two distinct equal-cost constraints at once.

pub mod cli;
pub mod cost;
pub mod dataset;
pub mod eo;
pub mod error;
pub mod impossibility;
pub mod metrics;
pub mod parity;
pub mod scene;

pub use cost::{CostPair, CostSpec, Segment};
pub use dataset::{GroupData, Sample, ScoreDistribution, SynthSpec};
pub use error::{Error, Result};
pub use metrics::{Binning, CalibrationReport, RatePoint};
pub use parity::{ApplicationMode, FeasibilityReason, FeasibilityVerdict, InterpolationPlan};
