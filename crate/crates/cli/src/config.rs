// SPDX-License-Identifier: Apache-2.0

//! Run configurations. Every subcommand is converted to a [`RunConfig`]
//! before execution, and `drayage run --config FILE` reads one from JSON.

use std::path::PathBuf;

use drayage_core::sddp::StoppingRule;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Generate(GenerateConfig),
    Train(TrainConfig),
    Evaluate(EvaluateConfig),
    Sensitivity(SensitivityConfig),
    Benchmark(BenchmarkConfig),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    /// 2x2 hubs, 2 carriers, 12 periods.
    Small,
    /// 6x6 hubs, 20 carriers, 12 periods.
    Practical,
    /// 3x3 hubs, 6 carriers, 12 periods.
    Downsized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub kind: Option<InstanceKind>,
    /// JSON file holding a practical-instance specification.
    #[serde(default)]
    pub spec: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Realizations per stage.
    pub size: usize,
    /// Train on the instance's nominal path only; `size` is ignored.
    #[serde(default)]
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub instance: PathBuf,
    pub seed: u64,
    pub lattice: LatticeConfig,
    pub rule: StoppingRule,
    pub forward_passes: usize,
    pub max_iterations: usize,
    pub workers: usize,
    pub out: PathBuf,
    #[serde(default)]
    pub stats: Option<PathBuf>,
    #[serde(default)]
    pub timing: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub instance: PathBuf,
    pub policy: PathBuf,
    pub scenarios: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub timing: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionKind {
    Inflow,
    Spot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub instance: PathBuf,
    pub dimension: DimensionKind,
    /// Sampling interval; defaults to the instance's flow or spot bounds.
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
    pub replications: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    #[serde(default)]
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub instance: PathBuf,
    pub seed: u64,
    pub lattice: LatticeConfig,
    /// Iteration budgets, strictly increasing.
    pub budgets: Vec<usize>,
    pub confidence: f64,
    /// Out-of-sample scenarios for the regret column; 0 skips it.
    pub eval_scenarios: usize,
    pub workers: usize,
    pub out: PathBuf,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub timing: Option<PathBuf>,
}

fn positive(name: &str, v: usize) -> CliResult<()> {
    if v == 0 {
        return Err(CliError::invalid(format!("{name} must be positive")));
    }
    Ok(())
}

impl LatticeConfig {
    fn validate(&self) -> CliResult<()> {
        if !self.deterministic {
            positive("lattice.size", self.size)?;
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        match self {
            RunConfig::Generate(c) => match (&c.kind, &c.spec) {
                (Some(_), None) | (None, Some(_)) => Ok(()),
                _ => Err(CliError::invalid("exactly one of kind and spec must be given")),
            },
            RunConfig::Train(c) => {
                c.lattice.validate()?;
                c.rule.validate()?;
                positive("forward_passes", c.forward_passes)?;
                positive("max_iterations", c.max_iterations)?;
                positive("workers", c.workers)
            }
            RunConfig::Evaluate(c) => {
                positive("scenarios", c.scenarios)?;
                positive("workers", c.workers)
            }
            RunConfig::Sensitivity(c) => {
                if c.replications < 2 {
                    return Err(CliError::invalid("replications must be at least 2"));
                }
                if let Some((lo, hi)) = c.bounds {
                    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                        return Err(CliError::invalid(format!("bounds [{lo}, {hi}] must be ordered and nonnegative")));
                    }
                }
                positive("workers", c.workers)
            }
            RunConfig::Benchmark(c) => {
                c.lattice.validate()?;
                if c.budgets.is_empty() || c.budgets[0] == 0 || c.budgets.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(CliError::invalid("budgets must be positive and strictly increasing"));
                }
                if !(c.confidence > 0.0 && c.confidence < 1.0) {
                    return Err(CliError::invalid("confidence must lie in (0, 1)"));
                }
                positive("workers", c.workers)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let ok = r#"{"command":"generate","kind":"small","seed":1,"out":"a.json"}"#;
        let cfg: RunConfig = serde_json::from_str(ok).unwrap();
        cfg.validate().unwrap();
        let bad = r#"{"command":"generate","kind":"small","seed":1,"out":"a.json","sede":2}"#;
        let err = serde_json::from_str::<RunConfig>(bad).unwrap_err().to_string();
        assert!(err.contains("sede"), "{err}");
    }

    #[test]
    fn train_rule_is_tagged() {
        let text = r#"{"command":"train","instance":"i.json","seed":3,"lattice":{"size":5},
            "rule":{"rule":"bound-stall","window":10,"tolerance":0.0001},
            "forward_passes":1,"max_iterations":5000,"workers":1,"out":"p.json"}"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        let RunConfig::Train(t) = cfg else { panic!() };
        assert_eq!(t.rule, StoppingRule::BoundStall { window: 10, tolerance: 1e-4 });
    }

    #[test]
    fn generate_needs_one_source() {
        let c = RunConfig::Generate(GenerateConfig { kind: None, spec: None, seed: 0, out: "x".into() });
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
