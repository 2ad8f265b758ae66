//! Average-treatment-effect estimation for randomized trials where the
//! covariates are themselves random draws from a population.
//!
//! The crate provides:
//!
//! - least-squares machinery with pooled mean-centering ([`ols`], [`dataset`]);
//! - the difference-in-means and regression ATE estimators with their
//!   standard errors ([`estimators`]);
//! - closed-form theoretical variances for both estimators and the
//!   dominance gap between them ([`oracle`]);
//! - inverse-probability-weighted and stratified variants ([`design`]);
//! - a seeded Monte Carlo harness, paired bootstrap intervals, and the
//!   estimation-error decomposition ([`simulate`], [`bootstrap`],
//!   [`decompose`]).
//!
//! All estimation routines are pure functions of immutable inputs and are
//! safe to call from multiple threads.

pub mod bootstrap;
pub mod dataset;
pub mod decompose;
pub mod design;
pub mod error;
pub mod estimators;
pub mod ols;
pub mod oracle;
pub mod simulate;

pub use bootstrap::{paired_bootstrap_ci, BootstrapInterval};
pub use dataset::{pool_center, CenteredDataset, Dataset, StratifiedDataset};
pub use decompose::{decompose_error, ErrorDecomposition};
pub use design::{
    ate_ipw_regression, ate_post_stratified, ate_stratified_naive, ate_weighted_contrast,
    reweight, stratum_indicator_dataset, ContrastNormalization, PropensitySpec,
};
pub use error::{Error, Result};
pub use estimators::{
    ate_diff_means, ate_diff_means_regression_se, ate_known_mean, ate_regression,
    ate_regression_interacted, wald_interval, AteEstimate, Method,
};
pub use ols::{fit_ols, fit_ols_named, predict_at, FitResult};
pub use oracle::{
    r2_threshold, var_diff, var_regression, variance_comparison, variance_gap,
    PopulationParams, VarianceComparison,
};
pub use simulate::{
    generate_dataset, generate_with_rng, r2_sweep, replication_seed, run_monte_carlo,
    run_monte_carlo_sharded, CovariateDist, Dgp, EstimatorStats, LinearDgp, NoiseSpec,
    SimulationConfig, SimulationReport, SweepRow, OFFSET_BENCHMARK_NOISE_SD,
    OFFSET_BENCHMARK_SLOPE_X1,
};
