// SPDX-License-Identifier: Apache-2.0

//! Artifact formats. JSON artifacts carry `format_version` and the units;
//! CSV tables start with one `#` header line holding the same information.

use std::fs;
use std::io::Write;
use std::path::Path;

use drayage_core::eval::{BiasCi, EvaluationReport, SensitivityResult};
use drayage_core::instancegen::{PracticalSpec, Problem};
use drayage_core::sddp::{Policy, RegretCheck, StoppingRule};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub money: String,
    pub quantity: String,
}

impl Default for Units {
    fn default() -> Self {
        Units { money: "USD".into(), quantity: "TEU".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format_version: u32,
    pub units: Units,
    /// `small`, `practical`, `downsized` or `custom`.
    pub kind: String,
    pub seed: u64,
    pub instance_hash: String,
    #[serde(default)]
    pub spec: Option<PracticalSpec>,
    pub problem: Problem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeInfo {
    pub size: usize,
    pub deterministic: bool,
    pub hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub format_version: u32,
    pub units: Units,
    pub seed: u64,
    pub instance_hash: String,
    pub lattice: LatticeInfo,
    pub rule: StoppingRule,
    pub forward_passes: usize,
    pub iterations: usize,
    pub lower_bound: f64,
    pub stop_reason: String,
    pub regret_checks: Vec<RegretCheck>,
    pub policy: Policy,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationFile {
    pub format_version: u32,
    pub units: Units,
    pub seed: u64,
    pub instance_hash: String,
    pub policy_iterations: usize,
    pub report: EvaluationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityFile {
    pub format_version: u32,
    pub units: Units,
    pub seed: u64,
    pub instance_hash: String,
    pub result: SensitivityResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRow {
    pub budget: usize,
    pub metrics: BiasCi,
    /// Bound gap of the last iteration's own forward cost.
    pub iteration_gap_pct: f64,
    pub solves: usize,
    pub mean_regret: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub format_version: u32,
    pub units: Units,
    pub seed: u64,
    pub instance_hash: String,
    pub lattice: LatticeInfo,
    pub confidence: f64,
    pub eval_scenarios: usize,
    pub rows: Vec<BenchmarkRow>,
}

/// Reads a JSON artifact; parse errors name the offending field.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn check_version(path: &Path, version: u32) -> CliResult<()> {
    if version != FORMAT_VERSION {
        return Err(CliError::invalid(format!(
            "{}: format_version {version} is not supported (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

pub fn read_instance(path: &Path) -> CliResult<InstanceFile> {
    let f: InstanceFile = read_json(path)?;
    check_version(path, f.format_version)?;
    f.problem.validate()?;
    if f.problem.instance.hash() != f.instance_hash {
        return Err(CliError::invalid(format!("{}: instance_hash does not match the instance", path.display())));
    }
    Ok(f)
}

pub fn read_policy(path: &Path, instance_hash: &str) -> CliResult<PolicyFile> {
    let f: PolicyFile = read_json(path)?;
    check_version(path, f.format_version)?;
    if f.instance_hash != instance_hash {
        return Err(CliError::invalid(format!("{}: policy was trained on a different instance", path.display())));
    }
    Ok(f)
}

/// Writes a CSV table preceded by a `#` metadata line.
pub fn write_table(path: &Path, meta: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let io = |e: &dyn std::fmt::Display| CliError::io(path, e);
    let mut buf = Vec::new();
    writeln!(buf, "# format_version={FORMAT_VERSION} money=USD quantity=TEU {meta}").map_err(|e| io(&e))?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(|e| io(&e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io(&e))?;
        }
        w.flush().map_err(|e| io(&e))?;
    }
    fs::write(path, buf).map_err(|e| io(&e))
}

/// Reads a table written by [`write_table`], skipping the metadata line.
pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| CliError::io(path, e))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()).map_err(|e| CliError::io(path, e)))
        .collect::<CliResult<_>>()?;
    Ok((header, rows))
}

/// Shortest decimal text that reads back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
