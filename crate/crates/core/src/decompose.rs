//! Decomposition of the regression estimator's error into a residual-mean
//! term, a slope-estimation term, and a slope-difference term.
//!
//! With per-arm means x̄_g, arm proportions p_g, true parameters (β⁰_g, β_g),
//! and covariate mean μ:
//!
//! ```text
//! R1 = [T̄ − (β⁰_T + x̄'_T β_T)] − [C̄ − (β⁰_C + x̄'_C β_C)]
//! R2 = −(x̄_T − x̄_C)'[p_C(β̂_T − β_T) + p_T(β̂_C − β_C)]
//! R3 = (p_T x̄_T + p_C x̄_C − μ)'(β_T − β_C)
//! ```
//!
//! and R1 + R2 + R3 = τ̂_regression − τ exactly. R3 carries the −μ shift so
//! the identity holds for any covariate mean; at μ = 0 it reduces to the
//! bare weighted-mean form.

use nalgebra::DVector;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::ate_regression;
use crate::ols::fit_ols;
use crate::oracle::PopulationParams;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorDecomposition {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl ErrorDecomposition {
    pub fn sum(&self) -> f64 {
        self.r1 + self.r2 + self.r3
    }
}

/// Splits `τ̂_regression − τ` into the three terms above, given the true
/// population parameters.
pub fn decompose_error(d: &Dataset, truth: &PopulationParams) -> Result<ErrorDecomposition> {
    if truth.p() != d.p() {
        return Err(Error::DimensionMismatch {
            what: "population slopes".into(),
            expected: d.p(),
            actual: truth.p(),
        });
    }
    let beta_t = DVector::from_vec(truth.beta_t.clone());
    let beta_c = DVector::from_vec(truth.beta_c.clone());
    let mu = truth.mu();

    let (yt, xt) = d.arm(true);
    let (yc, xc) = d.arm(false);
    let fit_t = fit_ols(&xt, &yt)?;
    let fit_c = fit_ols(&xc, &yc)?;

    let mean_t = DVector::from_iterator(d.p(), xt.column_iter().map(|c| c.mean()));
    let mean_c = DVector::from_iterator(d.p(), xc.column_iter().map(|c| c.mean()));
    let p_t = yt.len() as f64 / d.n() as f64;
    let p_c = 1.0 - p_t;

    let r1 = (yt.mean() - (truth.beta0_t + mean_t.dot(&beta_t)))
        - (yc.mean() - (truth.beta0_c + mean_c.dot(&beta_c)));
    let gap = &mean_t - &mean_c;
    let slope_err = (&fit_t.slopes - &beta_t) * p_c + (&fit_c.slopes - &beta_c) * p_t;
    let r2 = -gap.dot(&slope_err);
    let pooled = &mean_t * p_t + &mean_c * p_c - &mu;
    let r3 = pooled.dot(&(&beta_t - &beta_c));

    Ok(ErrorDecomposition { r1, r2, r3 })
}

/// Convenience for tests and diagnostics: the decomposition together with
/// the estimator error it must reproduce.
pub fn decomposition_identity_gap(d: &Dataset, truth: &PopulationParams) -> Result<f64> {
    let dec = decompose_error(d, truth)?;
    let tau_hat = ate_regression(d)?.point;
    Ok(dec.sum() - (tau_hat - truth.true_ate()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn truth_for(d: &Dataset) -> PopulationParams {
        PopulationParams {
            beta0_t: 1.5,
            beta0_c: 0.5,
            beta_t: vec![2.0, -0.5],
            beta_c: vec![1.0, 0.75],
            sigma2_t: 0.1,
            sigma2_c: 0.1,
            varf_t: 0.0,
            varf_c: 0.0,
            sigma_x: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            n_t: d.n_treated(),
            n_c: d.n_control(),
            mu_x: None,
        }
    }

    #[test]
    fn exact_linear_noiseless_data_gives_zero_terms() {
        // responses exactly β⁰_g + x'β_g → β̂ = β, residual means 0
        let n_t = 5;
        let n_c = 6;
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut xs = Vec::new();
        let grid = [
            (0.0, 1.0),
            (1.0, -1.0),
            (2.0, 0.5),
            (-1.0, 2.0),
            (0.5, 0.0),
            (1.5, 1.0),
        ];
        for i in 0..n_t {
            let (x1, x2) = grid[i];
            y.push(1.5 + 2.0 * x1 - 0.5 * x2);
            w.push(1.0);
            xs.push(x1);
            xs.push(x2);
        }
        for (x1, x2) in grid.iter().take(n_c - 1).map(|&(a, b)| (a + 0.25, b - 0.5)) {
            y.push(0.5 + 1.0 * x1 + 0.75 * x2);
            w.push(0.0);
            xs.push(x1);
            xs.push(x2);
        }
        y.push(0.5 + 1.0 * 3.0 + 0.75 * 1.0);
        w.push(0.0);
        xs.push(3.0);
        xs.push(1.0);

        let d = Dataset::new(y, w, DMatrix::from_row_slice(n_t + n_c, 2, &xs)).unwrap();
        let truth = truth_for(&d);
        let dec = decompose_error(&d, &truth).unwrap();
        assert_relative_eq!(dec.r1, 0.0, epsilon = 1e-10);
        assert_relative_eq!(dec.r2, 0.0, epsilon = 1e-10);
        // r3 is nonzero here (slopes differ and sample means are nonzero);
        // the identity still has to hold.
        assert_relative_eq!(
            decomposition_identity_gap(&d, &truth).unwrap(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn identity_holds_on_noisy_draws() {
        for seed in 0..8u64 {
            let d = crate::estimators::tests::fixture_random(seed);
            let truth = truth_for(&d);
            assert_relative_eq!(
                decomposition_identity_gap(&d, &truth).unwrap(),
                0.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn identity_holds_with_nonzero_mu() {
        let d = crate::estimators::tests::fixture_random(42);
        let mut truth = truth_for(&d);
        truth.mu_x = Some(vec![0.4, 1.1]);
        assert_relative_eq!(
            decomposition_identity_gap(&d, &truth).unwrap(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let d = crate::estimators::tests::fixture_random(1);
        let mut truth = truth_for(&d);
        truth.beta_t = vec![1.0];
        truth.beta_c = vec![1.0];
        truth.sigma_x = vec![vec![1.0]];
        assert!(decompose_error(&d, &truth).is_err());
    }
}
