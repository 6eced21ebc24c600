//! Persistence: shot CSV files, JSON documents and intensity grids.
//!
//! Every JSON document carries `"schema": "twb-v1"`.

mod grid;
mod json;
mod report;
mod shots;

pub use grid::{grid_sidecar_path, load_grid, save_grid, GridSidecar};
pub use json::{
    load_fit, load_histogram, load_model, save_fit, save_histogram, save_model, FitFile, HistogramFile,
    ModelFile,
};
pub use report::{
    load_report, save_report, sha256_file, sha256_hex, Command, Provenance, ReportDocument, RunConfig,
};
pub use shots::{histogram_from_shots, load_shots, read_shots, save_shots, write_shots};

use crate::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;

pub const SCHEMA: &str = "twb-v1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub(crate) fn check_schema(v: &serde_json::Value) -> Result<()> {
    let found = v.get("schema").and_then(|s| s.as_str()).unwrap_or("none");
    if found != SCHEMA {
        return Err(Error::SchemaVersion {
            expected: SCHEMA.into(),
            found: found.into(),
        });
    }
    Ok(())
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    check_schema(&v)?;
    Ok(serde_json::from_value(v)?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
