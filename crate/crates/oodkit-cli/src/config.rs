//! Run-configuration file: one flat JSON section per command.
//!
//! Every field is optional; resolution order is always
//! command-line flag → config value → built-in default. Enum-valued
//! settings are stored as strings and parsed with the same parsers the
//! flags use, so the two spellings can never drift apart.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::CliError;

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub journal: Option<PathBuf>,
    pub score: ScoreSection,
    pub eval: EvalSection,
    pub select_n: SelectNSection,
    pub synth_ood: SynthOodSection,
    pub simulate: SimulateSection,
    pub report: ReportSection,
}

/// Scorer settings shared by the `score` and `report` sections.
#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub method: Option<String>,
    pub tau: Option<f64>,
    pub top_n: Option<usize>,
    pub gamma: Option<f64>,
    pub gen_m: Option<usize>,
    pub energy_t: Option<f64>,
    pub transform: Option<String>,
    pub normalization: Option<String>,
}

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub input: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub prototypes: Option<PathBuf>,
    pub scale: Option<f64>,
    #[serde(flatten)]
    pub scorer: ScorerSection,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub method: Option<String>,
    pub dataset: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SelectNSection {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub prototypes: Option<PathBuf>,
    pub scale: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub val_size: Option<usize>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub pair_policy: Option<String>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub fixed: Option<bool>,
    pub k: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOodSection {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub val_size: Option<usize>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub pair_policy: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub theorem: Option<String>,
    pub input: Option<PathBuf>,
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub input: Option<PathBuf>,
    pub ood: Option<PathBuf>,
    #[serde(flatten)]
    pub scorer: ScorerSection,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    /// Load a config file, or return the all-defaults config when no path
    /// is given. An unreadable file is a data error; unparseable JSON (or
    /// an unknown key) is a configuration error.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// Parse a config-file string with the same parser its flag uses.
pub fn parse_setting<T>(value: &str, setting: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("bad config value for {setting}: {e}")))
}
