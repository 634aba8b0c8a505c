//! Error type shared by every module of the benchmark.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed timestamp {value:?}")]
    MalformedTimestamp { line: u64, value: String },

    #[error("line {line}: malformed value {value:?} in column {column}")]
    MalformedValue {
        line: u64,
        column: String,
        value: String,
    },

    #[error("line {line}: negative consumption {value}")]
    NegativeConsumption { line: u64, value: f64 },

    #[error("duplicate reading for meter {meter_id} at {timestamp}")]
    DuplicateRow { meter_id: String, timestamp: String },

    #[error("timestamp {timestamp} for meter {meter_id} is outside 2017 or not on a half-hour boundary")]
    TimestampOutOfRange { meter_id: String, timestamp: String },

    #[error("survey references unknown meter {0}")]
    UnknownSurveyMeter(String),

    #[error("meter {0} has no observed data")]
    EmptyMeter(String),

    #[error("unexpected CSV header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible unavailability profile: {0}")]
    InfeasibleProfile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("predictions and truth cover different meters: {0}")]
    MeterMismatch(String),

    #[error("truth is degenerate: the rAE denominator is zero")]
    DegenerateTruth,

    #[error("every meter has a degenerate monthly truth")]
    AllMetersDegenerate,

    #[error("criterion mean {value} for C{index} is outside [1, 5]")]
    CriterionOutOfRange { index: usize, value: f64 },

    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeatures { got: usize, max: usize },

    #[error("no rule fires for the given input")]
    NoRuleCoverage,

    #[error("missing explanation for meter {meter_id}, horizon {horizon}, finalist {finalist}")]
    MissingExplanation {
        meter_id: String,
        horizon: String,
        finalist: String,
    },

    #[error("unknown packet {0}")]
    UnknownPacket(String),

    #[error("unknown entry {0}")]
    UnknownEntry(String),

    #[error("Likert value {value} for C{index} is outside 1..=5")]
    LikertOutOfRange { index: usize, value: u8 },

    #[error("no responses recorded for packet {0}")]
    NoResponses(String),

    #[error("unknown pipeline {0:?}")]
    UnknownPipeline(String),

    #[error("missing input file {0}")]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
