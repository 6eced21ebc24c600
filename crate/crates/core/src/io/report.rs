use super::{read_json, write_json, SCHEMA, TOOL_VERSION};
use crate::criteria::{AnalysisOptions, CriteriaReport};
use crate::error::Result;
use crate::intensity::{Damping, GridSpec, NegativityReport, SeriesOptions};
use crate::reconstruct::{FitOptions, ReconstructionResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Analyze,
    Reconstruct,
    Intensity,
    Report,
}

/// Echo of everything that determines a run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub which: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_output: Option<String>,
    /// Negativity threshold relative to the grid maximum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negativity_eps: Option<f64>,
}

impl RunConfig {
    pub fn new(command: Command, output: impl Into<String>) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            output: output.into(),
            model: None,
            shots: None,
            seed: None,
            analysis: None,
            fit: None,
            series: None,
            grid: None,
            which: None,
            fit_input: None,
            grid_input: None,
            histogram_input: None,
            histogram_output: None,
            negativity_eps: None,
        }
    }

    pub fn damping(&self) -> Option<Damping> {
        self.series.map(|s| s.damping)
    }

    /// Every file the run reads.
    pub fn input_paths(&self) -> impl Iterator<Item = &String> {
        self.inputs
            .iter()
            .chain(self.model.iter())
            .chain(self.fit_input.iter())
            .chain(self.grid_input.iter())
            .chain(self.histogram_input.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: Option<u64>,
    /// SHA-256 of each input file, keyed by the path as given.
    pub input_hashes: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Provenance {
    /// Hashes every input named in `config`.
    pub fn for_config(config: &RunConfig) -> Result<Self> {
        let mut input_hashes = BTreeMap::new();
        for p in config.input_paths() {
            input_hashes.insert(p.clone(), sha256_file(p)?);
        }
        Ok(Self {
            tool_version: TOOL_VERSION.into(),
            seed: config.seed,
            input_hashes,
            config: config.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub criteria: CriteriaReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negativity: Option<NegativityReport<f64>>,
    pub provenance: Provenance,
}

impl ReportDocument {
    pub fn new(criteria: CriteriaReport, provenance: Provenance) -> Self {
        Self {
            schema: SCHEMA.into(),
            criteria,
            reconstruction: None,
            negativity: None,
            provenance,
        }
    }
}

pub fn save_report(path: impl AsRef<Path>, r: &ReportDocument) -> Result<()> {
    write_json(path.as_ref(), r)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    read_json(path.as_ref())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
