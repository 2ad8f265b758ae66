//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by dataset validation, fitting, and estimation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input vectors/matrices disagree on length or width.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: String, row: usize },

    /// Treatment flags must be exactly 0 or 1.
    #[error("treatment flag at row {row} is {value}, expected 0 or 1")]
    InvalidTreatment { row: usize, value: f64 },

    /// Both arms must contain at least one unit.
    #[error("the {arm} arm is empty")]
    EmptyArm { arm: &'static str },

    /// Too few rows to fit the requested regression.
    #[error("insufficient data in {arm}: {n} rows cannot support {p} covariates plus intercept")]
    InsufficientData { arm: String, n: usize, p: usize },

    /// The design matrix does not have full column rank.
    #[error("rank-deficient design: {column} is (numerically) collinear with earlier columns")]
    RankDeficient { column: String },

    /// A propensity value fell outside the open interval (0, 1).
    #[error("propensity at index {index} is {value}; must lie strictly inside (0, 1)")]
    InvalidPropensity { index: usize, value: f64 },

    /// Propensity vector length disagrees with the dataset.
    #[error("propensity vector has {actual} entries for {expected} units")]
    PropensityLength { expected: usize, actual: usize },

    /// A stratum lacks treated or control units, so the post-stratified
    /// estimand is undefined.
    #[error("stratum {stratum} has no {arm} units; post-stratified estimand undefined")]
    EmptyStratumCell { stratum: String, arm: &'static str },

    /// A covariance matrix failed the positive-semidefiniteness check.
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    /// An invalid simulation or bootstrap configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Bootstrap resampling kept producing degenerate designs.
    #[error("bootstrap replicate {replicate} still rank-deficient after {retries} redraws")]
    BootstrapRetriesExhausted { replicate: usize, retries: usize },

    /// An estimator failed inside a Monte Carlo replication.
    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
