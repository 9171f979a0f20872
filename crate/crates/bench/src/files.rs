//! Scenario and results file schemas.
//!
//! Both are pretty-printed JSON objects that start with a `format` name and a
//! `version` number. Readers reject other formats and newer versions.

use std::path::Path;

use contention::allocation::{
    Method, Scenario1Params, Scenario1Spec, Scenario2Params, Scenario2Spec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::BenchError;

pub const SCENARIO_FORMAT: &str = "contention-scenario";
pub const RESULTS_FORMAT: &str = "contention-results";
pub const FILE_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub seed: u64,
    #[serde(flatten)]
    pub body: ScenarioBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioBody {
    Scenario1 {
        params: Scenario1Params,
        instances: Vec<Scenario1Spec>,
    },
    Scenario2 {
        params: Scenario2Params,
        instances: Vec<Scenario2Spec>,
    },
}

impl ScenarioBody {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioBody::Scenario1 { .. } => "scenario1",
            ScenarioBody::Scenario2 { .. } => "scenario2",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ScenarioBody::Scenario1 { instances, .. } => instances.len(),
            ScenarioBody::Scenario2 { instances, .. } => instances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One method's outcome on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    /// Location or package of every controlled robot.
    pub assignment: Vec<usize>,
    pub predicted_cost: f64,
    pub ground_truth: f64,
    pub ground_truth_std_error: f64,
    /// Ground truth minus the best ground truth among the methods on this instance.
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResults {
    pub index: usize,
    pub outcomes: Vec<MethodOutcome>,
}

/// Regret of one method over all instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub instances: usize,
    pub mean_regret: f64,
    /// Half-width of the normal-approximation 95% confidence interval.
    pub regret_ci_half_width: f64,
    pub mean_ground_truth: f64,
    pub mean_predicted_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub scenario_kind: String,
    /// SHA-256 of the scenario file bytes.
    pub scenario_hash: String,
    pub seed: u64,
    pub ground_truth_samples: u64,
    pub tolerance: f64,
    pub methods: Vec<String>,
    /// Conditioning rule used by the analytical methods.
    pub rule: String,
    pub instances: Vec<InstanceResults>,
    pub summary: Vec<MethodSummary>,
}

/// Wall time of one method on one instance; kept out of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub instance: usize,
    pub method: String,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, BenchError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| BenchError::Compute(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn check_header(format: &str, version: u32, want: &str) -> Result<(), BenchError> {
    if format != want {
        return Err(BenchError::Usage(format!(
            "expected a {want} file, found format {format:?}"
        )));
    }
    if version > FILE_VERSION {
        return Err(BenchError::Usage(format!(
            "file version {version} is newer than supported {FILE_VERSION}"
        )));
    }
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, BenchError> {
    std::fs::read(path)
        .map_err(|e| BenchError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), BenchError> {
    std::fs::write(path, contents)
        .map_err(|e| BenchError::Compute(format!("cannot write {}: {e}", path.display())))
}

pub fn parse_scenario(bytes: &[u8]) -> Result<ScenarioFile, BenchError> {
    let file: ScenarioFile = serde_json::from_slice(bytes)
        .map_err(|e| BenchError::Usage(format!("invalid scenario file: {e}")))?;
    check_header(&file.format, file.version, SCENARIO_FORMAT)?;
    let invalid =
        |e: contention::Error| BenchError::Usage(format!("invalid scenario instance: {e}"));
    match &file.body {
        ScenarioBody::Scenario1 { instances, .. } => instances
            .iter()
            .try_for_each(|s| s.validate().map_err(invalid))?,
        ScenarioBody::Scenario2 { instances, .. } => instances
            .iter()
            .try_for_each(|s| s.validate().map_err(invalid))?,
    }
    Ok(file)
}

pub fn parse_results(bytes: &[u8]) -> Result<ResultsFile, BenchError> {
    let file: ResultsFile = serde_json::from_slice(bytes)
        .map_err(|e| BenchError::Usage(format!("invalid results file: {e}")))?;
    check_header(&file.format, file.version, RESULTS_FORMAT)?;
    Ok(file)
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>, BenchError> {
    let methods = split_methods(list)
        .into_iter()
        .map(|m| {
            m.parse::<Method>()
                .map_err(|e| BenchError::Usage(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(BenchError::Usage("no methods given".into()));
    }
    Ok(methods)
}

// Commas inside parentheses belong to the tag.
fn split_methods(list: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in list.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(list[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(list[start..].trim());
    out.retain(|s| !s.is_empty());
    out
}
