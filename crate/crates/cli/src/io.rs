//! Typed ingestion: CSV files against a column specification, and the NSW
//! whitespace-delimited layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};
use thiserror::Error;

use randx_core::{Dataset, StratifiedDataset};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("column {name:?} not found in header")]
    MissingColumn { name: String },

    #[error("column {name:?} selected more than once")]
    DuplicateColumn { name: String },

    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column {column:?}: missing value")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: treatment value {value} is not 0 or 1")]
    BadTreatment { row: usize, value: f64 },

    #[error("row {row}: expected {expected} whitespace-separated fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("expected {expected} rows in the NSW layout, found {actual}")]
    RowCount { expected: usize, actual: usize },

    #[error("fetch failed: {0}")]
    Fetch(String),

    #[error(transparent)]
    Core(#[from] randx_core::Error),
}

/// Which columns of a CSV file play which role.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub response: String,
    pub treatment: String,
    pub covariates: Vec<String>,
    pub stratum: Option<String>,
    pub propensity: Option<String>,
}

impl ColumnSpec {
    fn validate(&self) -> Result<(), LoadError> {
        let mut seen = BTreeMap::new();
        let mut check = |name: &str| -> Result<(), LoadError> {
            if seen.insert(name.to_string(), ()).is_some() {
                return Err(LoadError::DuplicateColumn { name: name.into() });
            }
            Ok(())
        };
        check(&self.response)?;
        check(&self.treatment)?;
        for c in &self.covariates {
            check(c)?;
        }
        if let Some(s) = &self.stratum {
            check(s)?;
        }
        if let Some(p) = &self.propensity {
            check(p)?;
        }
        Ok(())
    }
}

/// The typed result of loading a file.
#[derive(Debug, Clone)]
pub enum LoadedData {
    Plain(Dataset),
    Stratified(StratifiedDataset),
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: LoadedData,
    /// Per-unit propensities, when a propensity column was named.
    pub propensity: Option<Vec<f64>>,
    /// `sha256:<hex>` of the raw input bytes.
    pub digest: String,
}

impl Loaded {
    pub fn dataset(&self) -> Option<&Dataset> {
        match &self.data {
            LoadedData::Plain(d) => Some(d),
            LoadedData::Stratified(_) => None,
        }
    }

    pub fn stratified(&self) -> Option<&StratifiedDataset> {
        match &self.data {
            LoadedData::Stratified(sd) => Some(sd),
            LoadedData::Plain(_) => None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut out = String::with_capacity(71);
    out.push_str("sha256:");
    for b in hasher.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Loads a UTF-8, header-rowed CSV file as a typed dataset. A stratum column
/// in the spec switches the result to [`LoadedData::Stratified`], with
/// categorical labels mapped to dense integers in first-appearance order.
pub fn load_csv(path: &Path, spec: &ColumnSpec) -> Result<Loaded, LoadError> {
    let bytes = fs::read(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_csv_bytes(&bytes, spec)
}

pub fn load_csv_bytes(bytes: &[u8], spec: &ColumnSpec) -> Result<Loaded, LoadError> {
    spec.validate()?;
    let digest = sha256_hex(bytes);

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| LoadError::Io {
            path: "<input>".into(),
            message: e.to_string(),
        })?
        .clone();

    let col_index = |name: &str| -> Result<usize, LoadError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LoadError::MissingColumn { name: name.into() })
    };
    let response_ix = col_index(&spec.response)?;
    let treatment_ix = col_index(&spec.treatment)?;
    let covariate_ix: Vec<usize> = spec
        .covariates
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_, _>>()?;
    let stratum_ix = spec.stratum.as_deref().map(col_index).transpose()?;
    let propensity_ix = spec.propensity.as_deref().map(col_index).transpose()?;

    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut strata_raw: Vec<String> = Vec::new();
    let mut propensity: Vec<f64> = Vec::new();

    // data rows are 1-based in error messages
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| LoadError::Io {
            path: "<input>".into(),
            message: format!("row {row}: {e}"),
        })?;
        let cell = |ix: usize, column: &str| -> Result<f64, LoadError> {
            let raw = record.get(ix).unwrap_or("");
            if raw.is_empty() {
                return Err(LoadError::MissingValue {
                    row,
                    column: column.into(),
                });
            }
            raw.parse::<f64>().map_err(|_| LoadError::BadCell {
                row,
                column: column.into(),
                value: raw.into(),
            })
        };

        y.push(cell(response_ix, &spec.response)?);
        let t = cell(treatment_ix, &spec.treatment)?;
        if t != 0.0 && t != 1.0 {
            return Err(LoadError::BadTreatment { row, value: t });
        }
        w.push(t);
        for (j, &ix) in covariate_ix.iter().enumerate() {
            xs.push(cell(ix, &spec.covariates[j])?);
        }
        if let Some(ix) = stratum_ix {
            let raw = record.get(ix).unwrap_or("");
            if raw.is_empty() {
                return Err(LoadError::MissingValue {
                    row,
                    column: spec.stratum.clone().unwrap(),
                });
            }
            strata_raw.push(raw.to_string());
        }
        if let Some(ix) = propensity_ix {
            propensity.push(cell(ix, spec.propensity.as_deref().unwrap())?);
        }
    }

    let n = y.len();
    let data = if let Some(stratum_col) = &spec.stratum {
        let _ = stratum_col;
        let mut labels: Vec<String> = Vec::new();
        let mut dense = Vec::with_capacity(n);
        for raw in &strata_raw {
            let id = match labels.iter().position(|l| l == raw) {
                Some(id) => id,
                None => {
                    labels.push(raw.clone());
                    labels.len() - 1
                }
            };
            dense.push(id);
        }
        LoadedData::Stratified(StratifiedDataset::new(y, w, dense, Some(labels))?)
    } else {
        let p = covariate_ix.len();
        let x = DMatrix::from_row_slice(n, p, &xs);
        LoadedData::Plain(Dataset::with_names(
            y,
            w,
            x,
            Some(spec.covariates.clone()),
        )?)
    };

    Ok(Loaded {
        data,
        propensity: if propensity_ix.is_some() {
            Some(propensity)
        } else {
            None
        },
        digest,
    })
}

/// The bundled demonstration dataset in the NSW whitespace layout
/// (columns: treat age educ black hisp married nodegree re74 re75 re78).
pub const NSW_EMBEDDED: &str = include_str!("../data/nsw.dat");

/// Covariate names produced by the NSW loader, in order.
pub const NSW_COVARIATES: [&str; 7] = [
    "age",
    "education",
    "black",
    "hispanic",
    "married",
    "degree",
    "re74",
];

const NSW_ROWS: usize = 445;
const NSW_FIELDS: usize = 10;

/// Parses the NSW whitespace-delimited layout: response is 1978 earnings;
/// covariates are age, education years, black, hispanic, married, a
/// high-school-degree indicator (1 − nodegree), and 1974 earnings. The 1975
/// earnings column is parsed and discarded.
pub fn load_nsw_str(text: &str) -> Result<Dataset, LoadError> {
    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut xs = Vec::new();
    let mut rows = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != NSW_FIELDS {
            return Err(LoadError::FieldCount {
                row,
                expected: NSW_FIELDS,
                found: fields.len(),
            });
        }
        let mut vals = [0f64; NSW_FIELDS];
        for (j, raw) in fields.iter().enumerate() {
            vals[j] = raw.parse::<f64>().map_err(|_| LoadError::BadCell {
                row,
                column: format!("field {}", j + 1),
                value: (*raw).to_string(),
            })?;
        }
        let [treat, age, educ, black, hisp, married, nodegree, re74, _re75, re78] = vals;
        if treat != 0.0 && treat != 1.0 {
            return Err(LoadError::BadTreatment { row, value: treat });
        }
        w.push(treat);
        y.push(re78);
        xs.extend_from_slice(&[age, educ, black, hisp, married, 1.0 - nodegree, re74]);
        rows += 1;
    }
    if rows != NSW_ROWS {
        return Err(LoadError::RowCount {
            expected: NSW_ROWS,
            actual: rows,
        });
    }
    let x = DMatrix::from_row_slice(rows, 7, &xs);
    let names = NSW_COVARIATES.iter().map(|s| s.to_string()).collect();
    Ok(Dataset::with_names(y, w, x, Some(names))?)
}

/// Loads an NSW-layout file from disk; returns the dataset and the input's
/// `sha256:` digest.
pub fn load_nsw(path: &Path) -> Result<(Dataset, String), LoadError> {
    let bytes = fs::read(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let text = String::from_utf8_lossy(&bytes);
    Ok((load_nsw_str(&text)?, sha256_hex(&bytes)))
}

/// Loads the bundled demonstration dataset.
pub fn load_nsw_embedded() -> Result<(Dataset, String), LoadError> {
    Ok((
        load_nsw_str(NSW_EMBEDDED)?,
        sha256_hex(NSW_EMBEDDED.as_bytes()),
    ))
}

/// Opt-in network fetch of an NSW-layout file. The URL comes from the
/// caller (typically the `RANDX_NSW_URL` environment variable).
pub fn fetch_nsw(url: &str) -> Result<(Dataset, String), LoadError> {
    let body = ureq::get(url)
        .call()
        .map_err(|e| {
            LoadError::Fetch(format!(
                "{e}; run offline against a local file with --path, or set \
                 RANDX_NSW_URL to a reachable mirror"
            ))
        })?
        .into_string()
        .map_err(|e| LoadError::Fetch(e.to_string()))?;
    Ok((load_nsw_str(&body)?, sha256_hex(body.as_bytes())))
}
