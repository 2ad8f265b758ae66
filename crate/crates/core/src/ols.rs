//! Ordinary least squares with an intercept, solved by column-pivoted QR.
//!
//! The QR route is used instead of explicit normal equations for
//! conditioning; the normal-equations form exists only as an independent
//! oracle in the test suite.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One arm's least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub intercept: f64,
    pub slopes: DVector<f64>,
    pub residuals: DVector<f64>,
    /// SSE / df_resid; 0 when the fit interpolates exactly (df_resid = 0).
    pub mse: f64,
    /// 1 − SSE/SST against the sample's own mean; 1 for a constant response.
    pub r_squared: f64,
    pub df_resid: usize,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn p(&self) -> usize {
        self.slopes.len()
    }

    /// Residual sum of squares.
    pub fn sse(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Fits `y = b0 + x·b` by least squares.
///
/// Requires n ≥ p+1 rows and a full-rank design; n = p+1 produces an exact
/// interpolating fit with `mse = 0` and `df_resid = 0`.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    fit_ols_named(x, y, None)
}

/// As [`fit_ols`], with covariate names used in rank-deficiency errors.
pub fn fit_ols_named(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: Option<&[String]>,
) -> Result<FitResult> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "response".into(),
            expected: n,
            actual: y.len(),
        });
    }
    if n < p + 1 {
        return Err(Error::InsufficientData {
            arm: "sample".into(),
            n,
            p,
        });
    }

    let design = design_with_intercept(x);
    let k = p + 1;

    let qr = design.clone().col_piv_qr();
    let r = qr.r();
    let scale = r[(0, 0)].abs();
    let tol = (n.max(k) as f64) * f64::EPSILON * scale.max(1e-300);
    if scale == 0.0 || (0..k).any(|j| r[(j, j)].abs() <= tol) {
        let column = first_dependent_column(&design, names);
        return Err(Error::RankDeficient { column });
    }

    // design · P = Q · R  ⇒  β = P · R⁻¹ Qᵀ y
    let mut coef = qr.q().transpose() * y;
    let solved = r
        .view((0, 0), (k, k))
        .solve_upper_triangular_mut(&mut coef);
    if !solved {
        let column = first_dependent_column(&design, names);
        return Err(Error::RankDeficient { column });
    }
    qr.p().inv_permute_rows(&mut coef);

    let fitted = &design * &coef;
    let residuals = y - fitted;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let df_resid = n - k;
    let mse = if df_resid == 0 {
        0.0
    } else {
        sse / df_resid as f64
    };
    let y_bar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - y_bar) * (v - y_bar)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(FitResult {
        intercept: coef[0],
        slopes: DVector::from_iterator(p, coef.iter().skip(1).copied()),
        residuals,
        mse,
        r_squared,
        df_resid,
    })
}

/// Evaluates the fitted surface at a covariate vector.
pub fn predict_at(fit: &FitResult, x: &DVector<f64>) -> Result<f64> {
    if x.len() != fit.slopes.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction point".into(),
            expected: fit.slopes.len(),
            actual: x.len(),
        });
    }
    Ok(fit.intercept + fit.slopes.dot(x))
}

pub(crate) fn design_with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut design = DMatrix::zeros(n, x.ncols() + 1);
    design.column_mut(0).fill(1.0);
    for j in 0..x.ncols() {
        design.column_mut(j + 1).copy_from(&x.column(j));
    }
    design
}

/// Scans design columns in input order and names the first one that is
/// numerically in the span of its predecessors. Only called on the error
/// path, so the O(k²·n) Gram–Schmidt sweep is fine.
fn first_dependent_column(design: &DMatrix<f64>, names: Option<&[String]>) -> String {
    let n = design.nrows();
    let k = design.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..k {
        let mut v = DVector::from_iterator(n, design.column(j).iter().copied());
        let norm0 = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
            // second pass for reorthogonalization
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let tol = (n as f64) * f64::EPSILON * norm0.max(1e-300) * 32.0;
        if v.norm() <= tol {
            return match (j, names) {
                (0, _) => "intercept".to_string(),
                (j, Some(names)) if j - 1 < names.len() => names[j - 1].clone(),
                (j, _) => format!("column {}", j - 1),
            };
        }
        basis.push(v.normalize());
    }
    // Rank deficiency detected by QR but not by the scan: report the last
    // column rather than panic.
    match names {
        Some(names) if !names.is_empty() => names[names.len() - 1].clone(),
        _ => format!("column {}", k.saturating_sub(2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn exact_line() {
        let fit = fit_ols(&col(&[0.0, 1.0, 2.0]), &DVector::from_vec(vec![0.0, 1.0, 2.0]))
            .unwrap();
        assert_relative_eq!(fit.intercept, 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.slopes[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.mse, 0.0, epsilon = 1e-20);
        assert_relative_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn constant_response() {
        let c = 4.25;
        let fit = fit_ols(&col(&[0.0, 1.0, 2.0]), &DVector::from_vec(vec![c, c, c])).unwrap();
        assert_relative_eq!(fit.intercept, c, epsilon = 1e-12);
        assert_relative_eq!(fit.slopes[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn two_point_interpolation() {
        // {(0,3),(1,5)}: exact line 3 + 2x, prediction at 0.5 is 4
        let fit = fit_ols(&col(&[0.0, 1.0]), &DVector::from_vec(vec![3.0, 5.0])).unwrap();
        assert_eq!(fit.df_resid, 0);
        assert_eq!(fit.mse, 0.0);
        let p = predict_at(&fit, &DVector::from_vec(vec![0.5])).unwrap();
        assert_relative_eq!(p, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn regression_through_the_means() {
        let x = DMatrix::from_row_slice(6, 2, &[
            0.4, 1.2, //
            1.1, -0.3, //
            2.0, 0.8, //
            -0.7, 2.2, //
            1.6, 1.0, //
            0.2, -1.4,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.5, -0.5, 3.0, 0.25, 1.75]);
        let fit = fit_ols(&x, &y).unwrap();
        let mean_x = DVector::from_vec(vec![x.column(0).mean(), x.column(1).mean()]);
        let at_mean = predict_at(&fit, &mean_x).unwrap();
        assert_relative_eq!(at_mean, y.mean(), max_relative = 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let x = DMatrix::from_row_slice(8, 2, &[
            0.4, 1.2, 1.1, -0.3, 2.0, 0.8, -0.7, 2.2, //
            1.6, 1.0, 0.2, -1.4, 0.9, 0.1, -1.2, 0.6,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.5, -0.5, 3.0, 0.25, 1.75, -1.0, 0.5]);
        let fit = fit_ols(&x, &y).unwrap();
        let design = design_with_intercept(&x);
        let rn = fit.residuals.norm();
        for j in 0..design.ncols() {
            let cj = DVector::from_iterator(8, design.column(j).iter().copied());
            let dot = fit.residuals.dot(&cj).abs();
            assert!(dot <= 1e-8 * rn * cj.norm() + 1e-14, "column {j}: {dot}");
        }
    }

    #[test]
    fn insufficient_rows() {
        let err = fit_ols(&col(&[1.0]), &DVector::from_vec(vec![2.0])).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { n: 1, p: 1, .. }));
    }

    #[test]
    fn rank_deficiency_names_column() {
        // x1 duplicated as x2
        let x = DMatrix::from_row_slice(5, 2, &[
            1.0, 2.0, //
            2.0, 4.0, //
            3.0, 6.0, //
            4.0, 8.0, //
            5.0, 10.0,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let names = vec!["first".to_string(), "second".to_string()];
        let err = fit_ols_named(&x, &y, Some(&names)).unwrap_err();
        assert_eq!(
            err,
            Error::RankDeficient {
                column: "second".into()
            }
        );
    }

    #[test]
    fn constant_covariate_collides_with_intercept() {
        let x = col(&[3.0, 3.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let names = vec!["flat".to_string()];
        let err = fit_ols_named(&x, &y, Some(&names)).unwrap_err();
        assert_eq!(
            err,
            Error::RankDeficient {
                column: "flat".into()
            }
        );
    }

    #[test]
    fn predict_dimension_mismatch() {
        let fit = fit_ols(&col(&[0.0, 1.0, 2.0]), &DVector::from_vec(vec![0.0, 1.0, 2.0]))
            .unwrap();
        let err = predict_at(&fit, &DVector::from_vec(vec![1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn affine_rescaling_leaves_predictions_unchanged() {
        let x = DMatrix::from_row_slice(6, 2, &[
            0.4, 1.2, 1.1, -0.3, 2.0, 0.8, //
            -0.7, 2.2, 1.6, 1.0, 0.2, -1.4,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.5, -0.5, 3.0, 0.25, 1.75]);
        let fit = fit_ols(&x, &y).unwrap();

        let mut rescaled = x.clone();
        let (a, b) = (3.5, -40.0);
        for v in rescaled.column_mut(0).iter_mut() {
            *v = a * *v + b;
        }
        let fit2 = fit_ols(&rescaled, &y).unwrap();

        for i in 0..x.nrows() {
            let px = predict_at(&fit, &DVector::from_vec(vec![x[(i, 0)], x[(i, 1)]])).unwrap();
            let pz = predict_at(
                &fit2,
                &DVector::from_vec(vec![a * x[(i, 0)] + b, x[(i, 1)]]),
            )
            .unwrap();
            assert_relative_eq!(px, pz, max_relative = 1e-10, epsilon = 1e-10);
        }
    }
}
