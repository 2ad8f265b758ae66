//! Data ingestion and report emission for the `randx` command-line tool.
//!
//! The library half of the binary: typed CSV loading against a column
//! specification, the NSW whitespace-layout loader (with a bundled demo
//! dataset), and the versioned JSON/CSV report schema.

pub mod io;
pub mod report;

pub use io::{
    load_csv, load_nsw, load_nsw_embedded, load_nsw_str, ColumnSpec, LoadError, Loaded,
    LoadedData, NSW_EMBEDDED,
};
pub use report::{parse_report, NswDemoReport, OracleReport, Provenance, Report};
