//! Paired bootstrap percentile intervals.
//!
//! Covariate–response pairs are resampled with replacement *within each
//! arm*, preserving the n_T/n_C design while mimicking the sampling of whole
//! units (response and covariates together) from the population.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{ate_diff_means, ate_regression, ate_regression_interacted, Method};

/// Redraws allowed per replicate before giving up on degenerate resamples.
const MAX_RETRIES_PER_REPLICATE: usize = 100;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    /// Estimate on the original data.
    pub point: f64,
    pub method: Method,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
}

fn point_estimate(method: Method, d: &Dataset) -> Result<f64> {
    match method {
        Method::DiffMeans => Ok(ate_diff_means(d)?.point),
        Method::Regression => Ok(ate_regression(d)?.point),
        Method::RegressionInteracted => Ok(ate_regression_interacted(d)?.point),
        other => Err(Error::InvalidConfig(format!(
            "bootstrap does not support the {other} estimator"
        ))),
    }
}

/// Percentile interval for `method` from `b` within-arm pair resamples.
/// Deterministic for a fixed seed. Replicates whose resampled design is too
/// degenerate to fit are redrawn up to a cap.
pub fn paired_bootstrap_ci(
    d: &Dataset,
    method: Method,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval> {
    if b < 100 {
        return Err(Error::InvalidConfig(format!(
            "need at least 100 bootstrap replicates, got {b}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let point = point_estimate(method, d)?;

    let treated_rows: Vec<usize> = (0..d.n()).filter(|&i| d.treated_flags()[i]).collect();
    let control_rows: Vec<usize> = (0..d.n()).filter(|&i| !d.treated_flags()[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(b);
    for replicate in 0..b {
        let mut retries = 0;
        loop {
            let mut idx = Vec::with_capacity(d.n());
            for _ in 0..treated_rows.len() {
                idx.push(treated_rows[rng.gen_range(0..treated_rows.len())]);
            }
            for _ in 0..control_rows.len() {
                idx.push(control_rows[rng.gen_range(0..control_rows.len())]);
            }
            let resampled = d.select_rows(&idx);
            match point_estimate(method, &resampled) {
                Ok(p) => {
                    points.push(p);
                    break;
                }
                Err(Error::RankDeficient { .. }) | Err(Error::InsufficientData { .. }) => {
                    retries += 1;
                    if retries > MAX_RETRIES_PER_REPLICATE {
                        return Err(Error::BootstrapRetriesExhausted { replicate, retries });
                    }
                }
                Err(other) => return Err(other),
            }
        }
    }
    points.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        low: percentile(&points, alpha),
        high: percentile(&points, 1.0 - alpha),
        point,
        method,
        level,
        replicates: b,
        seed,
    })
}

/// Linear-interpolation quantile of a sorted slice (the common "type 7"
/// definition).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn constant_responses_give_zero_width() {
        let d = Dataset::new(
            vec![2.0; 8]
                .into_iter()
                .enumerate()
                .map(|(i, v)| if i < 4 { v } else { 1.0 })
                .collect(),
            vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            DMatrix::zeros(8, 0),
        )
        .unwrap();
        let ci = paired_bootstrap_ci(&d, Method::DiffMeans, 200, 0.95, 1).unwrap();
        assert_relative_eq!(ci.low, 1.0);
        assert_relative_eq!(ci.high, 1.0);
        assert_relative_eq!(ci.point, 1.0);
    }

    #[test]
    fn fixed_seed_reproduces_interval() {
        let d = crate::estimators::tests::fixture_random(31);
        let a = paired_bootstrap_ci(&d, Method::Regression, 300, 0.9, 42).unwrap();
        let b = paired_bootstrap_ci(&d, Method::Regression, 300, 0.9, 42).unwrap();
        assert_eq!(a.low.to_bits(), b.low.to_bits());
        assert_eq!(a.high.to_bits(), b.high.to_bits());
        let c = paired_bootstrap_ci(&d, Method::Regression, 300, 0.9, 43).unwrap();
        assert_ne!(a.low.to_bits(), c.low.to_bits());
    }

    #[test]
    fn preconditions_enforced() {
        let d = crate::estimators::tests::fixture_random(2);
        assert!(paired_bootstrap_ci(&d, Method::Regression, 99, 0.95, 1).is_err());
        assert!(paired_bootstrap_ci(&d, Method::Regression, 200, 1.0, 1).is_err());
        assert!(paired_bootstrap_ci(&d, Method::PostStratified, 200, 0.95, 1).is_err());
    }

    #[test]
    fn interval_brackets_point_for_smooth_data() {
        let d = crate::estimators::tests::fixture_random(8);
        let ci = paired_bootstrap_ci(&d, Method::DiffMeans, 500, 0.95, 7).unwrap();
        assert!(ci.low <= ci.point && ci.point <= ci.high);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(percentile(&v, 0.5), 2.5);
        assert_relative_eq!(percentile(&v, 0.0), 1.0);
        assert_relative_eq!(percentile(&v, 1.0), 4.0);
    }
}
