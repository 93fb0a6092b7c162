// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drayage_core::sddp::StoppingRule;

use crate::config::*;
use crate::error::CliResult;
use crate::files::read_json;

#[derive(Debug, Parser)]
#[command(name = "drayage", version, about = "Multistage stochastic drayage volume allocation with SDDP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed; every random draw derives from it.
    #[arg(long, env = "DRAYAGE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct WorkersArg {
    /// Worker threads. Results do not depend on this value.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// Realizations per stage in the training lattice.
    #[arg(long, default_value_t = 10)]
    pub lattice_size: usize,
    /// Train on the nominal path alone.
    #[arg(long)]
    pub deterministic: bool,
}

impl LatticeArgs {
    fn config(&self) -> LatticeConfig {
        LatticeConfig { size: self.lattice_size, deterministic: self.deterministic }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RuleKind {
    IterationLimit,
    BoundStall,
    SimulationGap,
    AdaptiveRegret,
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    #[arg(long, value_enum, default_value = "iteration-limit")]
    pub rule: RuleKind,
    /// Iteration limit.
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    /// Window of the bound-stall (default 10) or simulation-gap (default 50) rule.
    #[arg(long)]
    pub window: Option<usize>,
    /// Relative bound improvement for the bound-stall rule.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Relative gap for the simulation-gap rule.
    #[arg(long, default_value_t = 0.01)]
    pub gap: f64,
    /// Iterations between regret checks.
    #[arg(long, default_value_t = 25)]
    pub period: usize,
    /// Out-of-sample scenarios per regret check.
    #[arg(long, default_value_t = 100)]
    pub scenarios: usize,
    /// Smallest regret improvement that keeps training going.
    #[arg(long, default_value_t = 0.002)]
    pub improvement: f64,
}

impl RuleArgs {
    fn rule(&self) -> StoppingRule {
        match self.rule {
            RuleKind::IterationLimit => StoppingRule::IterationLimit { iterations: self.iterations },
            RuleKind::BoundStall => {
                StoppingRule::BoundStall { window: self.window.unwrap_or(10), tolerance: self.tolerance }
            }
            RuleKind::SimulationGap => StoppingRule::SimulationGap {
                confidence: self.confidence,
                gap: self.gap,
                window: self.window.unwrap_or(50),
            },
            RuleKind::AdaptiveRegret => StoppingRule::AdaptiveRegret {
                period: self.period,
                scenarios: self.scenarios,
                improvement: self.improvement,
            },
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Generate {
        #[arg(long, value_enum, conflicts_with = "spec", required_unless_present = "spec")]
        kind: Option<InstanceKind>,
        /// Practical-instance specification (JSON).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy; writes the policy file and, optionally, the stats table.
    Train {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long, default_value_t = 1)]
        forward_passes: usize,
        /// Always-on iteration cap.
        #[arg(long, default_value_t = 5000)]
        max_iterations: usize,
        #[command(flatten)]
        workers: WorkersArg,
        /// Policy file.
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration stats table (CSV).
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Per-iteration wall times (CSV).
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Simulate a policy on out-of-sample scenarios and compute regret.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1000)]
        scenarios: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        workers: WorkersArg,
        /// Report file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-scenario table (CSV).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Resample one data dimension and record the dispersion of the optimum.
    Sensitivity {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        dimension: DimensionKind,
        /// Lower end of the sampling interval.
        #[arg(long, requires = "hi")]
        lo: Option<f64>,
        /// Upper end of the sampling interval.
        #[arg(long, requires = "lo")]
        hi: Option<f64>,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        workers: WorkersArg,
        #[arg(long)]
        out: PathBuf,
        /// Objective table (CSV).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Bound gap, confidence width and wall time across iteration budgets.
    Benchmark {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_delimiter = ',', default_value = "50,100,150")]
        budgets: Vec<usize>,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        /// Out-of-sample scenarios for a regret column; 0 skips it.
        #[arg(long, default_value_t = 0)]
        eval_scenarios: usize,
        #[command(flatten)]
        workers: WorkersArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Execute a run configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Command {
    pub fn into_config(self) -> CliResult<RunConfig> {
        Ok(match self {
            Command::Generate { kind, spec, seed, out } => {
                RunConfig::Generate(GenerateConfig { kind, spec, seed: seed.seed, out })
            }
            Command::Train {
                instance,
                seed,
                lattice,
                rule,
                forward_passes,
                max_iterations,
                workers,
                out,
                stats,
                timing,
            } => RunConfig::Train(TrainConfig {
                instance,
                seed: seed.seed,
                lattice: lattice.config(),
                rule: rule.rule(),
                forward_passes,
                max_iterations,
                workers: workers.workers,
                out,
                stats,
                timing,
            }),
            Command::Evaluate { instance, policy, scenarios, seed, workers, out, table, timing } => {
                RunConfig::Evaluate(EvaluateConfig {
                    instance,
                    policy,
                    scenarios,
                    seed: seed.seed,
                    workers: workers.workers,
                    out,
                    table,
                    timing,
                })
            }
            Command::Sensitivity { instance, dimension, lo, hi, replications, seed, workers, out, table } => {
                RunConfig::Sensitivity(SensitivityConfig {
                    instance,
                    dimension,
                    bounds: lo.zip(hi),
                    replications,
                    seed: seed.seed,
                    workers: workers.workers,
                    out,
                    table,
                })
            }
            Command::Benchmark {
                instance,
                seed,
                lattice,
                budgets,
                confidence,
                eval_scenarios,
                workers,
                out,
                table,
                timing,
            } => RunConfig::Benchmark(BenchmarkConfig {
                instance,
                seed: seed.seed,
                lattice: lattice.config(),
                budgets,
                confidence,
                eval_scenarios,
                workers: workers.workers,
                out,
                table,
                timing,
            }),
            Command::Run { config } => read_json(&config)?,
        })
    }
}
