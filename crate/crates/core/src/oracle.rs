//! Closed-form variances of both ATE estimators under a known population,
//! the dominance gap between them, and the R² threshold separating the
//! conditional from the marginal variance estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population quantities that determine both estimators' sampling variances:
/// per-arm best-linear-approximation intercepts and slopes, error variances,
/// nonlinearity variances, the common covariate covariance, arm sizes, and
/// the covariate mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationParams {
    pub beta0_t: f64,
    pub beta0_c: f64,
    pub beta_t: Vec<f64>,
    pub beta_c: Vec<f64>,
    pub sigma2_t: f64,
    pub sigma2_c: f64,
    #[serde(default)]
    pub varf_t: f64,
    #[serde(default)]
    pub varf_c: f64,
    /// Row-major p×p covariate covariance.
    pub sigma_x: Vec<Vec<f64>>,
    pub n_t: usize,
    pub n_c: usize,
    /// E[X]; defaults to the zero vector.
    #[serde(default)]
    pub mu_x: Option<Vec<f64>>,
}

impl PopulationParams {
    /// Scalar-covariate constructor used by fixtures.
    pub fn scalar(
        beta_t: f64,
        beta_c: f64,
        sigma2_t: f64,
        sigma2_c: f64,
        sigma_x: f64,
        n_t: usize,
        n_c: usize,
    ) -> Self {
        PopulationParams {
            beta0_t: 0.0,
            beta0_c: 0.0,
            beta_t: vec![beta_t],
            beta_c: vec![beta_c],
            sigma2_t,
            sigma2_c,
            varf_t: 0.0,
            varf_c: 0.0,
            sigma_x: vec![vec![sigma_x]],
            n_t,
            n_c,
            mu_x: None,
        }
    }

    pub fn p(&self) -> usize {
        self.beta_t.len()
    }

    pub fn mu(&self) -> DVector<f64> {
        match &self.mu_x {
            Some(mu) => DVector::from_vec(mu.clone()),
            None => DVector::zeros(self.p()),
        }
    }

    /// τ = (β⁰_T − β⁰_C) + E[X]'(β_T − β_C).
    pub fn true_ate(&self) -> f64 {
        let mu = self.mu();
        let delta = DVector::from_vec(self.beta_t.clone()) - DVector::from_vec(self.beta_c.clone());
        self.beta0_t - self.beta0_c + mu.dot(&delta)
    }

    fn sigma_matrix(&self) -> Result<DMatrix<f64>> {
        let p = self.p();
        if self.beta_c.len() != p {
            return Err(Error::DimensionMismatch {
                what: "beta_c".into(),
                expected: p,
                actual: self.beta_c.len(),
            });
        }
        if self.sigma_x.len() != p || self.sigma_x.iter().any(|row| row.len() != p) {
            return Err(Error::DimensionMismatch {
                what: "sigma_x".into(),
                expected: p,
                actual: self.sigma_x.len(),
            });
        }
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] = self.sigma_x[i][j];
            }
        }
        Ok(m)
    }

    /// Validates symmetry-ish PSD-ness (eigenvalue floor −1e-10 relative to
    /// scale) and nonnegative variance components; returns Σ.
    pub fn validated_sigma(&self) -> Result<DMatrix<f64>> {
        if self.sigma2_t < 0.0 || self.sigma2_c < 0.0 || self.varf_t < 0.0 || self.varf_c < 0.0 {
            return Err(Error::InvalidConfig(
                "variance components must be nonnegative".into(),
            ));
        }
        if self.n_t == 0 || self.n_c == 0 {
            return Err(Error::InvalidConfig("arm sizes must be positive".into()));
        }
        let m = self.sigma_matrix()?;
        if m.ncols() == 0 {
            return Ok(m);
        }
        let sym = (&m + m.transpose()) * 0.5;
        let scale = sym.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let eig = sym.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
        Ok(sym)
    }
}

fn qform(sigma: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        (sigma * v).dot(v)
    }
}

fn residual_term(params: &PopulationParams) -> f64 {
    (params.sigma2_t + params.varf_t) / params.n_t as f64
        + (params.sigma2_c + params.varf_c) / params.n_c as f64
}

/// Variance of the difference-in-means estimator:
/// `[(σ²_T+Var f_T)/n_T + (σ²_C+Var f_C)/n_C] + β'_T Σ β_T/n_T + β'_C Σ β_C/n_C`.
pub fn var_diff(params: &PopulationParams) -> Result<f64> {
    let sigma = params.validated_sigma()?;
    let beta_t = DVector::from_vec(params.beta_t.clone());
    let beta_c = DVector::from_vec(params.beta_c.clone());
    Ok(residual_term(params)
        + qform(&sigma, &beta_t) / params.n_t as f64
        + qform(&sigma, &beta_c) / params.n_c as f64)
}

/// Variance of the regression estimator:
/// `[(σ²_T+Var f_T)/n_T + (σ²_C+Var f_C)/n_C] + (β_T−β_C)' Σ (β_T−β_C)/N`.
///
/// The O(N⁻²) remainder is deliberately omitted; callers wanting a
/// conservative bound can add their own via `o_n2_bound`.
pub fn var_regression(params: &PopulationParams) -> Result<f64> {
    var_regression_with_bound(params, 0.0)
}

/// [`var_regression`] plus a caller-supplied bound standing in for the
/// omitted O(N⁻²) term.
pub fn var_regression_with_bound(params: &PopulationParams, o_n2_bound: f64) -> Result<f64> {
    let sigma = params.validated_sigma()?;
    let delta = DVector::from_vec(params.beta_t.clone()) - DVector::from_vec(params.beta_c.clone());
    let n = (params.n_t + params.n_c) as f64;
    Ok(residual_term(params) + qform(&sigma, &delta) / n + o_n2_bound)
}

/// `var_diff − var_regression`. Always ≥ 0 up to rounding; zero exactly when
/// β_C = −(n_C/n_T)·β_T, where the appendix quadratic form
/// `(√(n_C/n_T)β_T + √(n_T/n_C)β_C)' Σ (…)/N` vanishes.
pub fn variance_gap(params: &PopulationParams) -> Result<f64> {
    Ok(var_diff(params)? - var_regression(params)?)
}

/// R² level at which the conditional (fixed-covariate) variance estimate of
/// an arm mean equals the marginal one: `(p+2)/(n+1)`.
pub fn r2_threshold(n: usize, p: usize) -> Result<f64> {
    if n <= p + 1 {
        return Err(Error::InvalidConfig(format!(
            "need n > p+1 for the R² threshold, got n={n}, p={p}"
        )));
    }
    Ok((p as f64 + 2.0) / (n as f64 + 1.0))
}

/// Side-by-side evaluation of the two variance estimates for one arm's mean
/// response: the conditional-on-covariates estimate `MSE·(1 + 1/n)` and the
/// marginal estimate `SST/n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarianceComparison {
    pub conditional: f64,
    pub marginal: f64,
    pub r_squared: f64,
    pub threshold: f64,
    /// True when the conditional estimate is the smaller one, i.e. when the
    /// fit's R² exceeds the threshold.
    pub conditional_smaller: bool,
}

/// Compares the conditional and marginal variance estimates of an arm mean
/// given that arm's fit summary. `sst` is the response's total sum of
/// squares, `sse` the fit's residual sum of squares.
pub fn variance_comparison(n: usize, p: usize, sst: f64, sse: f64) -> Result<VarianceComparison> {
    if n <= p + 1 {
        return Err(Error::InvalidConfig(format!(
            "need n > p+1 residual degrees of freedom, got n={n}, p={p}"
        )));
    }
    if sst < 0.0 || sse < 0.0 {
        return Err(Error::InvalidConfig(
            "sums of squares must be nonnegative".into(),
        ));
    }
    let nf = n as f64;
    let mse = sse / (nf - p as f64 - 1.0);
    let conditional = mse * (1.0 + 1.0 / nf);
    let marginal = sst / nf;
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(VarianceComparison {
        conditional,
        marginal,
        r_squared,
        threshold: r2_threshold(n, p)?,
        conditional_smaller: conditional < marginal,
    })
}
