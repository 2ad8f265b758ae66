//! Trial data containers: per-unit responses, treatment flags, and covariates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A randomized-trial dataset: one response, one 0/1 treatment flag, and a
/// row of covariates per unit.
///
/// Construction validates the basic invariants (equal lengths, finite values,
/// binary flags, both arms non-empty). Regression-specific preconditions
/// (arm sizes, rank) are checked by the operations that need them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    w: Vec<bool>,
    x: DMatrix<f64>,
    names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from raw columns. `x` is n×p (p may be 0).
    pub fn new(y: Vec<f64>, w: Vec<f64>, x: DMatrix<f64>) -> Result<Self> {
        Self::with_names(y, w, x, None)
    }

    pub fn with_names(
        y: Vec<f64>,
        w: Vec<f64>,
        x: DMatrix<f64>,
        names: Option<Vec<String>>,
    ) -> Result<Self> {
        if w.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "treatment flags".into(),
                expected: y.len(),
                actual: w.len(),
            });
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "covariate rows".into(),
                expected: y.len(),
                actual: x.nrows(),
            });
        }
        if let Some(names) = &names {
            if names.len() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "covariate names".into(),
                    expected: x.ncols(),
                    actual: names.len(),
                });
            }
        }
        for (row, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "response".into(),
                    row,
                });
            }
        }
        for row in 0..x.nrows() {
            for col in 0..x.ncols() {
                if !x[(row, col)].is_finite() {
                    return Err(Error::NonFinite {
                        what: format!("covariate column {col}"),
                        row,
                    });
                }
            }
        }
        let mut flags = Vec::with_capacity(w.len());
        for (row, &v) in w.iter().enumerate() {
            if v == 1.0 {
                flags.push(true);
            } else if v == 0.0 {
                flags.push(false);
            } else {
                return Err(Error::InvalidTreatment { row, value: v });
            }
        }
        if !flags.iter().any(|&t| t) {
            return Err(Error::EmptyArm { arm: "treated" });
        }
        if !flags.iter().any(|&t| !t) {
            return Err(Error::EmptyArm { arm: "control" });
        }
        Ok(Self {
            y: DVector::from_vec(y),
            w: flags,
            x,
            names,
        })
    }

    /// Convenience constructor for a single covariate column.
    pub fn univariate(y: Vec<f64>, w: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let n = x.len();
        Self::new(y, w, DMatrix::from_vec(n, 1, x))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.w.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.n() - self.n_treated()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn treated_flags(&self) -> &[bool] {
        &self.w
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Name for covariate column `j`, falling back to `x{j}`.
    pub fn column_name(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{j}"),
        }
    }

    /// Responses and covariate rows for one arm, in original row order.
    pub fn arm(&self, treated: bool) -> (DVector<f64>, DMatrix<f64>) {
        let rows: Vec<usize> = self
            .w
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == treated)
            .map(|(i, _)| i)
            .collect();
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let mut x = DMatrix::zeros(rows.len(), self.x.ncols());
        for (out_row, &i) in rows.iter().enumerate() {
            for j in 0..self.x.ncols() {
                x[(out_row, j)] = self.x[(i, j)];
            }
        }
        (y, x)
    }

    /// Mean response of one arm.
    pub fn arm_mean(&self, treated: bool) -> f64 {
        let (y, _) = self.arm(treated);
        y.mean()
    }

    /// Column means over all N rows: (n_T·x̄_T + n_C·x̄_C)/N.
    pub fn pooled_covariate_mean(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.x.ncols(),
            self.x.column_iter().map(|c| c.mean()),
        )
    }

    /// Pooled empirical covariance of the covariates, divisor N−1.
    pub fn pooled_covariance(&self) -> DMatrix<f64> {
        covariance(&self.x)
    }

    /// Empirical covariance of one arm's covariates, divisor n_g−1.
    pub fn arm_covariance(&self, treated: bool) -> DMatrix<f64> {
        let (_, x) = self.arm(treated);
        covariance(&x)
    }

    /// True when every response is exactly 0 or 1.
    pub fn is_binary_response(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Replaces the response vector, keeping flags and covariates.
    pub(crate) fn with_responses(&self, y: DVector<f64>) -> Self {
        debug_assert_eq!(y.len(), self.n());
        Self {
            y,
            w: self.w.clone(),
            x: self.x.clone(),
            names: self.names.clone(),
        }
    }

    /// Replaces the covariate matrix, keeping responses and flags.
    pub(crate) fn with_covariates(&self, x: DMatrix<f64>) -> Self {
        debug_assert_eq!(x.nrows(), self.n());
        Self {
            y: self.y.clone(),
            w: self.w.clone(),
            x,
            names: self.names.clone(),
        }
    }

    /// New dataset holding the rows at `idx` (with repetition allowed).
    pub(crate) fn select_rows(&self, idx: &[usize]) -> Self {
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let w = idx.iter().map(|&i| self.w[i]).collect();
        let mut x = DMatrix::zeros(idx.len(), self.x.ncols());
        for (out_row, &i) in idx.iter().enumerate() {
            for j in 0..self.x.ncols() {
                x[(out_row, j)] = self.x[(i, j)];
            }
        }
        Self {
            y,
            w,
            x,
            names: self.names.clone(),
        }
    }
}

/// Column covariance with divisor n−1. Returns a 0×0 matrix for p = 0 and a
/// zero matrix when n < 2.
pub(crate) fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    if p == 0 {
        return DMatrix::zeros(0, 0);
    }
    if n < 2 {
        return DMatrix::zeros(p, p);
    }
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (x[(r, i)] - means[i]) * (x[(r, j)] - means[j]);
            }
            let v = acc / (n as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// A dataset whose covariates have been centered at the pooled mean.
#[derive(Debug, Clone)]
pub struct CenteredDataset {
    pub dataset: Dataset,
    pub pooled_mean: DVector<f64>,
}

/// Centers every covariate row at the pooled mean (n_T·x̄_T + n_C·x̄_C)/N.
/// The source dataset is untouched.
pub fn pool_center(d: &Dataset) -> CenteredDataset {
    let pooled_mean = d.pooled_covariate_mean();
    let mut x = d.x().clone();
    for mut row in x.row_iter_mut() {
        for j in 0..pooled_mean.len() {
            row[j] -= pooled_mean[j];
        }
    }
    CenteredDataset {
        dataset: d.with_covariates(x),
        pooled_mean,
    }
}

/// Responses, flags, and an integer stratum label per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedDataset {
    y: Vec<f64>,
    w: Vec<bool>,
    stratum: Vec<usize>,
    n_strata: usize,
    labels: Vec<String>,
}

impl StratifiedDataset {
    /// `stratum` holds dense labels in 0..n_strata. `labels` (optional) maps
    /// each dense label back to the source category.
    pub fn new(
        y: Vec<f64>,
        w: Vec<f64>,
        stratum: Vec<usize>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if w.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "treatment flags".into(),
                expected: y.len(),
                actual: w.len(),
            });
        }
        if stratum.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "stratum labels".into(),
                expected: y.len(),
                actual: stratum.len(),
            });
        }
        for (row, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "response".into(),
                    row,
                });
            }
        }
        let mut flags = Vec::with_capacity(w.len());
        for (row, &v) in w.iter().enumerate() {
            match v {
                v if v == 1.0 => flags.push(true),
                v if v == 0.0 => flags.push(false),
                value => return Err(Error::InvalidTreatment { row, value }),
            }
        }
        if !flags.iter().any(|&t| t) {
            return Err(Error::EmptyArm { arm: "treated" });
        }
        if !flags.iter().any(|&t| !t) {
            return Err(Error::EmptyArm { arm: "control" });
        }
        let n_strata = stratum.iter().max().map_or(0, |&m| m + 1);
        let labels = labels.unwrap_or_else(|| (0..n_strata).map(|i| i.to_string()).collect());
        if labels.len() != n_strata {
            return Err(Error::DimensionMismatch {
                what: "stratum label table".into(),
                expected: n_strata,
                actual: labels.len(),
            });
        }
        Ok(Self {
            y,
            w: flags,
            stratum,
            n_strata,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_strata(&self) -> usize {
        self.n_strata
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn treated_flags(&self) -> &[bool] {
        &self.w
    }

    pub fn stratum(&self) -> &[usize] {
        &self.stratum
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    /// Unit counts K[stratum][arm] with arm index 0 = control, 1 = treated.
    pub fn cell_counts(&self) -> Vec<[usize; 2]> {
        let mut counts = vec![[0usize; 2]; self.n_strata];
        for (i, &s) in self.stratum.iter().enumerate() {
            counts[s][self.w[i] as usize] += 1;
        }
        counts
    }
}
