//! Design-based estimator variants: inverse-probability weighting for known
//! assignment probabilities, and stratified / post-stratified estimators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, StratifiedDataset};
use crate::error::{Error, Result};
use crate::estimators::{ate_regression, AteEstimate, Method};

/// Unit weights above this trigger an extreme-weight warning.
pub const EXTREME_WEIGHT_THRESHOLD: f64 = 20.0;

/// Known treatment-assignment probabilities π_i = P(treated | covariates).
#[derive(Debug, Clone)]
pub enum PropensitySpec {
    /// One π for every unit.
    Constant(f64),
    /// A π per unit, in dataset row order.
    PerUnit(Vec<f64>),
    /// A deterministic rule evaluated on each unit's covariate row.
    Rule(fn(&[f64]) -> f64),
}

impl PropensitySpec {
    /// Per-unit probabilities, validated to lie strictly inside (0, 1).
    pub fn resolve(&self, d: &Dataset) -> Result<Vec<f64>> {
        let n = d.n();
        let pis: Vec<f64> = match self {
            PropensitySpec::Constant(pi) => vec![*pi; n],
            PropensitySpec::PerUnit(v) => {
                if v.len() != n {
                    return Err(Error::PropensityLength {
                        expected: n,
                        actual: v.len(),
                    });
                }
                v.clone()
            }
            PropensitySpec::Rule(f) => (0..n)
                .map(|i| {
                    let row: Vec<f64> = (0..d.p()).map(|j| d.x()[(i, j)]).collect();
                    f(&row)
                })
                .collect(),
        };
        for (index, &pi) in pis.iter().enumerate() {
            if !(pi > 0.0 && pi < 1.0) || !pi.is_finite() {
                return Err(Error::InvalidPropensity { index, value: pi });
            }
        }
        Ok(pis)
    }
}

/// Result of reweighting: the transformed dataset plus the weights applied
/// and any extreme-weight warnings.
#[derive(Debug, Clone)]
pub struct Reweighted {
    pub dataset: Dataset,
    pub weights: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Divides treated responses by π_i and control responses by 1−π_i.
/// Covariates and flags are untouched.
pub fn reweight(d: &Dataset, ps: &PropensitySpec) -> Result<Reweighted> {
    let pis = ps.resolve(d)?;
    let mut y = d.y().clone();
    let mut weights = Vec::with_capacity(d.n());
    let mut warnings = Vec::new();
    for (i, &treated) in d.treated_flags().iter().enumerate() {
        let w = if treated {
            1.0 / pis[i]
        } else {
            1.0 / (1.0 - pis[i])
        };
        if w > EXTREME_WEIGHT_THRESHOLD {
            warnings.push(format!(
                "unit {i}: weight {w:.3} exceeds {EXTREME_WEIGHT_THRESHOLD}; \
                 variance may be dominated by this unit"
            ));
        }
        y[i] *= w;
        weights.push(w);
    }
    Ok(Reweighted {
        dataset: d.with_responses(y),
        weights,
        warnings,
    })
}

/// Normalization of the weighted contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastNormalization {
    /// Divide each arm's weighted sum by the arm count n_g.
    ArmCount,
    /// Divide each arm's weighted sum by its sum of weights (Hájek).
    Hajek,
}

/// The weighted contrast `(1/n_T)Σ y_i/π_i − (1/n_C)Σ y_i/(1−π_i)` (or its
/// Hájek-normalized variant). No standard error is reported.
pub fn ate_weighted_contrast(
    d: &Dataset,
    ps: &PropensitySpec,
    normalization: ContrastNormalization,
) -> Result<AteEstimate> {
    let rw = reweight(d, ps)?;
    let mut sums = [0.0f64; 2];
    let mut weight_sums = [0.0f64; 2];
    let mut counts = [0.0f64; 2];
    for (i, &treated) in d.treated_flags().iter().enumerate() {
        let arm = treated as usize;
        sums[arm] += rw.dataset.y()[i];
        weight_sums[arm] += rw.weights[i];
        counts[arm] += 1.0;
    }
    let point = match normalization {
        ContrastNormalization::ArmCount => sums[1] / counts[1] - sums[0] / counts[0],
        ContrastNormalization::Hajek => sums[1] / weight_sums[1] - sums[0] / weight_sums[0],
    };
    let mut est = AteEstimate {
        method: Method::WeightedContrast,
        point,
        se: None,
        n_t: d.n_treated(),
        n_c: d.n_control(),
        diagnostics: BTreeMap::new(),
        warnings: rw.warnings,
    };
    est.diagnostics.insert(
        "hajek_normalization".into(),
        f64::from(normalization == ContrastNormalization::Hajek),
    );
    est.warnings
        .push("no standard error is available for the weighted contrast".into());
    Ok(est)
}

/// Runs the regression estimator on the reweighted responses. The SE is the
/// usual pooled-covariance formula applied to the weighted responses, which
/// ignores the weighting's own contribution to sampling variance.
pub fn ate_ipw_regression(d: &Dataset, ps: &PropensitySpec) -> Result<AteEstimate> {
    let rw = reweight(d, ps)?;
    let inner = ate_regression(&rw.dataset)?;
    let mut est = inner;
    est.method = Method::IpwRegression;
    est.warnings.extend(rw.warnings);
    est.warnings.push(
        "SE treats the weighted responses as observed data; it does not account \
         for weighting variance"
            .into(),
    );
    Ok(est)
}

/// Grand treated mean minus grand control mean, ignoring strata.
pub fn ate_stratified_naive(sd: &StratifiedDataset) -> Result<AteEstimate> {
    let mut sums = [0.0f64; 2];
    let mut counts = [0.0f64; 2];
    for (i, &t) in sd.treated_flags().iter().enumerate() {
        sums[t as usize] += sd.y()[i];
        counts[t as usize] += 1.0;
    }
    Ok(AteEstimate {
        method: Method::StratifiedNaive,
        point: sums[1] / counts[1] - sums[0] / counts[0],
        se: None,
        n_t: counts[1] as usize,
        n_c: counts[0] as usize,
        diagnostics: BTreeMap::new(),
        warnings: Vec::new(),
    })
}

/// Post-stratified estimator: per-stratum difference in means weighted by
/// the stratum's share of the sample. Every stratum must contain at least
/// one treated and one control unit.
pub fn ate_post_stratified(sd: &StratifiedDataset) -> Result<AteEstimate> {
    let counts = sd.cell_counts();
    for (s, cell) in counts.iter().enumerate() {
        if cell[1] == 0 {
            return Err(Error::EmptyStratumCell {
                stratum: sd.label(s).to_string(),
                arm: "treated",
            });
        }
        if cell[0] == 0 {
            return Err(Error::EmptyStratumCell {
                stratum: sd.label(s).to_string(),
                arm: "control",
            });
        }
    }
    let i = sd.n_strata();
    let mut sums = vec![[0.0f64; 2]; i];
    for (row, &t) in sd.treated_flags().iter().enumerate() {
        sums[sd.stratum()[row]][t as usize] += sd.y()[row];
    }
    let n = sd.n() as f64;
    let mut point = 0.0;
    for s in 0..i {
        let mean_t = sums[s][1] / counts[s][1] as f64;
        let mean_c = sums[s][0] / counts[s][0] as f64;
        let share = (counts[s][0] + counts[s][1]) as f64 / n;
        point += (mean_t - mean_c) * share;
    }
    let n_t: usize = counts.iter().map(|c| c[1]).sum();
    let n_c: usize = counts.iter().map(|c| c[0]).sum();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("n_strata".into(), i as f64);
    Ok(AteEstimate {
        method: Method::PostStratified,
        point,
        se: None,
        n_t,
        n_c,
        diagnostics,
        warnings: Vec::new(),
    })
}

/// Re-expresses a stratified dataset as a plain dataset whose covariates are
/// stratum indicators (reference coding: strata 1..I−1, dropping stratum 0).
/// Running [`ate_regression`] on it reproduces the post-stratified estimator
/// exactly.
pub fn stratum_indicator_dataset(sd: &StratifiedDataset) -> Result<Dataset> {
    let n = sd.n();
    let i = sd.n_strata();
    let p = i.saturating_sub(1);
    let mut x = DMatrix::zeros(n, p);
    for (row, &s) in sd.stratum().iter().enumerate() {
        if s > 0 {
            x[(row, s - 1)] = 1.0;
        }
    }
    let names = (1..i).map(|s| format!("stratum_{}", sd.label(s))).collect();
    Dataset::with_names(
        sd.y().to_vec(),
        sd.treated_flags().iter().map(|&t| f64::from(t)).collect(),
        x,
        Some(names),
    )
}
