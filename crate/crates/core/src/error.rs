use thiserror::Error;

use crate::parity::FeasibilityReason;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: {message}")]
    Row { row: u64, message: String },

    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),

    #[error("label {0} is not 0 or 1")]
    NonBinaryLabel(i64),

    #[error("group `{0}` has no samples")]
    EmptyGroup(String),

    #[error("group `{group}` contains a single class (base rate {base_rate})")]
    SingleClass { group: String, base_rate: f64 },

    #[error("no negative (y = 0) samples")]
    NoNegatives,

    #[error("no positive (y = 1) samples")]
    NoPositives,

    #[error("{name} = {value} must lie strictly inside (0, 1)")]
    OpenUnitInterval { name: &'static str, value: f64 },

    #[error("{name} = {value} must lie inside [0, 1]")]
    UnitInterval { name: &'static str, value: f64 },

    #[error("{name} = {value} must be a finite, non-negative number")]
    Negative { name: &'static str, value: f64 },

    #[error("cost coefficients ({a}, {b}) must be non-negative and not both zero")]
    InvalidCost { a: f64, b: f64 },

    #[error("invalid binning: {0}")]
    InvalidBinning(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynth(String),

    #[error("instance is infeasible: {0:?}")]
    Infeasible(FeasibilityReason),

    #[error("group 2 is already at its trivial cost; the interpolation parameter is undefined")]
    AlreadyTrivial,

    #[error("plan mode does not match the requested operation")]
    WrongMode,

    #[error("the two equal-cost constraints are not distinct")]
    NonDistinctConstraints,

    #[error("base rates must differ (both are {0})")]
    EqualBaseRates(f64),

    #[error("bound hypothesis violated: {0}")]
    BoundHypothesis(String),

    #[error("{0}")]
    Usage(String),
}
