//! Versioned machine-readable reports (JSON schema 1, plus flat CSV rows).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use randx_core::AteEstimate;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the numbers came from: input digest, RNG seed (when the command is
/// stochastic), and tool version. No timestamps, so identical inputs give
/// byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_digest: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub version: String,
}

impl Provenance {
    pub fn new(input_digest: impl Into<String>, seed: Option<u64>) -> Self {
        Provenance {
            input_digest: input_digest.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// One estimate, ready for emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub method: String,
    pub point: f64,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub level: f64,
    pub n_t: usize,
    pub n_c: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_squared_combined: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl Report {
    pub fn from_estimate(
        est: &AteEstimate,
        level: f64,
        provenance: Provenance,
    ) -> randx_core::Result<Report> {
        let interval = est.interval(level)?;
        let mut diagnostics = est.diagnostics.clone();
        let r_squared_combined = diagnostics.remove("combined_r_squared");
        Ok(Report {
            schema: SCHEMA_VERSION,
            method: est.method.as_str().to_string(),
            point: est.point,
            se: est.se,
            ci_low: interval.map(|(lo, _)| lo),
            ci_high: interval.map(|(_, hi)| hi),
            level,
            n_t: est.n_t,
            n_c: est.n_c,
            r_squared_combined,
            diagnostics,
            warnings: est.warnings.clone(),
            provenance,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV: header plus one row.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        format!(
            "method,point,se,ci_low,ci_high,level,n_t,n_c,r_squared_combined\n\
             {},{},{},{},{},{},{},{},{}\n",
            self.method,
            self.point,
            fmt(self.se),
            fmt(self.ci_low),
            fmt(self.ci_high),
            self.level,
            self.n_t,
            self.n_c,
            fmt(self.r_squared_combined),
        )
    }
}

pub fn parse_report(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

/// Output of the `oracle` subcommand: one named quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema: u32,
    pub quantity: String,
    pub value: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub details: BTreeMap<String, f64>,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, value: f64) -> Self {
        OracleReport {
            schema: SCHEMA_VERSION,
            quantity: quantity.into(),
            value,
            details: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        out.push_str(&format!("{},{}\n", self.quantity, self.value));
        for (k, v) in &self.details {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

/// Output of the `nsw-demo` subcommand: both estimators side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NswDemoReport {
    pub schema: u32,
    pub diff_means: Report,
    pub regression: Report,
    /// 100·(1 − SE_regression/SE_diff).
    pub se_gain_percent: f64,
    pub combined_r_squared: f64,
}

impl NswDemoReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("demo report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.diff_means.to_csv();
        let second = self.regression.to_csv();
        out.push_str(second.lines().nth(1).unwrap_or(""));
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            schema: SCHEMA_VERSION,
            method: "regression".into(),
            point: 4435.2,
            se: Some(431.9),
            ci_low: Some(3588.6),
            ci_high: Some(5281.8),
            level: 0.95,
            n_t: 185,
            n_c: 260,
            r_squared_combined: Some(0.24),
            diagnostics: BTreeMap::from([("mse_treated".into(), 1.25e7)]),
            warnings: vec![],
            provenance: Provenance::new("sha256:abc", Some(7)),
        }
    }

    #[test]
    fn json_round_trip_is_identical() {
        let report = sample();
        let text = report.to_json();
        let parsed = parse_report(&text).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(parsed.to_json(), text);
    }

    #[test]
    fn round_trip_preserves_full_f64_precision() {
        let mut report = sample();
        report.point = 1.797_442_541_400_256_4;
        report.se = Some(f64::MIN_POSITIVE);
        let parsed = parse_report(&report.to_json()).unwrap();
        assert_eq!(parsed.point.to_bits(), report.point.to_bits());
        assert_eq!(
            parsed.se.unwrap().to_bits(),
            report.se.unwrap().to_bits()
        );
    }

    #[test]
    fn csv_has_header_and_one_row() {
        let text = sample().to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("method,point,se"));
        assert!(lines[1].starts_with("regression,4435.2,431.9"));
    }

    #[test]
    fn wald_invariant_ci_brackets_point() {
        let r = sample();
        assert!(r.ci_low.unwrap() <= r.point && r.point <= r.ci_high.unwrap());
    }
}
