//! Run configuration: a TOML file with one section per stage, every field
//! optional, and command-line flags taking precedence over the file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub inputs: InputsConfig,
    pub ingest: IngestConfig,
    pub fit: FitConfig,
    pub hedge: HedgeConfig,
    pub panel: PanelConfig,
    pub simulate: SimulateConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputsConfig {
    pub index: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub date_column: Option<String>,
    pub value_column: Option<String>,
    /// Single-character field delimiter.
    pub delimiter: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub max_rate_percent: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub tau_lo: Option<f64>,
    pub tau_hi: Option<f64>,
    pub grid_points: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HedgeConfig {
    pub start: Option<NaiveDate>,
    pub maturity: Option<NaiveDate>,
    pub cost_bp: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanelConfig {
    pub term_min_months: Option<u32>,
    pub term_max_months: Option<u32>,
    pub cost_bp: Option<f64>,
    pub alpha: Option<f64>,
    pub init_start: Option<NaiveDate>,
    pub init_end: Option<NaiveDate>,
    pub burn_in_years: Option<f64>,
    pub histogram_bins: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub s0: Option<f64>,
    pub tau0: Option<f64>,
    pub slope: Option<f64>,
    pub horizon_years: Option<f64>,
    pub step_years: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    /// How many sampled trajectories to write out in full.
    pub emit_paths: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("bad config {}: {e}", path.display())))
    }

    /// Canonical JSON of the effective configuration, hashed into the
    /// manifest so a run can be matched to its exact inputs.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
