// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use drayage_core::eval::{
    bias_and_ci_at, evaluate_policy, iteration_gap_pct, sensitivity_run, PoolRegret, SensitivityDimension,
};
use drayage_core::instancegen::{gen_practical_instance, gen_small_instance, PracticalSpec, Problem};
use drayage_core::scenario::{build_lattice, RandomStream, ScenarioLattice};
use drayage_core::sddp::{train, Policy, RegretEvaluator, StoppingRule, TrainOptions, TrainingStats};

use crate::config::{
    BenchmarkConfig, DimensionKind, EvaluateConfig, GenerateConfig, InstanceKind, LatticeConfig, RunConfig,
    SensitivityConfig, TrainConfig,
};
use crate::error::{CliError, CliResult};
use crate::files::*;

pub fn execute(config: &RunConfig) -> CliResult<()> {
    config.validate()?;
    match config {
        RunConfig::Generate(c) => generate(c),
        RunConfig::Train(c) => run_train(c),
        RunConfig::Evaluate(c) => evaluate(c),
        RunConfig::Sensitivity(c) => sensitivity(c),
        RunConfig::Benchmark(c) => benchmark(c),
    }
}

fn generate(c: &GenerateConfig) -> CliResult<()> {
    let stream = RandomStream::new(c.seed).child("instance");
    let (kind, spec, problem) = match (c.kind, &c.spec) {
        (Some(InstanceKind::Small), _) => ("small", None, gen_small_instance(&stream)?),
        (Some(InstanceKind::Practical), _) => {
            let spec = PracticalSpec::default();
            let p = gen_practical_instance(&spec, &stream)?;
            ("practical", Some(spec), p)
        }
        (Some(InstanceKind::Downsized), _) => {
            let spec = PracticalSpec::downsized();
            let p = gen_practical_instance(&spec, &stream)?;
            ("downsized", Some(spec), p)
        }
        (None, Some(path)) => {
            let spec: PracticalSpec = read_json(path)?;
            spec.validate().map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            let p = gen_practical_instance(&spec, &stream)?;
            ("custom", Some(spec), p)
        }
        (None, None) => unreachable!("validated"),
    };
    if !problem.recourse.worst_case {
        eprintln!("warning: worst-case flows exceed hub and carrier capacity; training may hit infeasible stages");
    }
    let file = InstanceFile {
        format_version: FORMAT_VERSION,
        units: Units::default(),
        kind: kind.into(),
        seed: c.seed,
        instance_hash: problem.instance.hash(),
        spec,
        problem,
    };
    write_json(&c.out, &file)
}

fn lattice_for(problem: &Problem, cfg: &LatticeConfig, seed: u64) -> CliResult<(ScenarioLattice, LatticeInfo)> {
    let lattice = if cfg.deterministic {
        ScenarioLattice::deterministic(&problem.nominal)
    } else {
        build_lattice(&problem.instance, &problem.flow_model, cfg.size, &RandomStream::new(seed).child("lattice"))?
    };
    let info = LatticeInfo {
        size: if cfg.deterministic { 1 } else { cfg.size },
        deterministic: cfg.deterministic,
        hash: lattice.hash(),
    };
    Ok((lattice, info))
}

/// Trains on the instance with the adaptive-regret evaluator wired in when
/// the rule needs one.
fn train_problem(
    problem: &Problem,
    lattice: &ScenarioLattice,
    rule: &StoppingRule,
    seed: u64,
    options: &TrainOptions,
) -> CliResult<(Policy, TrainingStats)> {
    let stream = RandomStream::new(seed);
    let mut pool = match rule {
        StoppingRule::AdaptiveRegret { scenarios, .. } => Some(PoolRegret::sampled(
            &problem.instance,
            &problem.flow_model,
            *scenarios,
            &stream.child("regret"),
            options.workers,
        )?),
        _ => None,
    };
    let evaluator = pool.as_mut().map(|p| p as &mut dyn RegretEvaluator);
    Ok(train(&problem.instance, lattice, rule, &stream.child("train"), options, evaluator)?)
}

fn stats_rows(stats: &TrainingStats) -> Vec<Vec<String>> {
    stats
        .records
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.lower_bound),
                num(r.forward_cost),
                num(iteration_gap_pct(r.forward_cost, r.lower_bound)),
                r.solves.to_string(),
                r.cuts.to_string(),
            ]
        })
        .collect()
}

pub const STATS_HEADER: [&str; 6] = ["iteration", "lower_bound", "forward_cost", "bias_pct", "solves", "cuts"];

fn write_timing(path: &Path, label: &str, rows: Vec<(String, f64)>) -> CliResult<()> {
    let rows: Vec<Vec<String>> = rows.into_iter().map(|(k, v)| vec![k, num(v)]).collect();
    write_table(path, "timing=wall-clock", &[label, "wall_ms"], &rows)
}

fn run_train(c: &TrainConfig) -> CliResult<()> {
    let inst = read_instance(&c.instance)?;
    let (lattice, info) = lattice_for(&inst.problem, &c.lattice, c.seed)?;
    let options = TrainOptions { forward_passes: c.forward_passes, max_iterations: c.max_iterations, workers: c.workers };
    let (policy, stats) = train_problem(&inst.problem, &lattice, &c.rule, c.seed, &options)?;
    let last = stats.last().expect("at least one iteration");
    eprintln!(
        "trained {} iterations, lower bound {}, stop reason {}",
        last.iteration,
        last.lower_bound,
        policy.metadata.stop_reason.as_deref().unwrap_or("-")
    );
    let meta = format!("seed={} instance_hash={}", c.seed, inst.instance_hash);
    if let Some(path) = &c.stats {
        write_table(path, &meta, &STATS_HEADER, &stats_rows(&stats))?;
    }
    if let Some(path) = &c.timing {
        let rows = stats.records.iter().zip(&stats.wall_ms).map(|(r, w)| (r.iteration.to_string(), *w)).collect();
        write_timing(path, "iteration", rows)?;
    }
    let file = PolicyFile {
        format_version: FORMAT_VERSION,
        units: Units::default(),
        seed: c.seed,
        instance_hash: inst.instance_hash.clone(),
        lattice: info,
        rule: c.rule.clone(),
        forward_passes: c.forward_passes,
        iterations: last.iteration,
        lower_bound: last.lower_bound,
        stop_reason: policy.metadata.stop_reason.clone().unwrap_or_default(),
        regret_checks: stats.regret_checks.clone(),
        policy,
    };
    write_json(&c.out, &file)
}

fn evaluate(c: &EvaluateConfig) -> CliResult<()> {
    let inst = read_instance(&c.instance)?;
    let pf = read_policy(&c.policy, &inst.instance_hash)?;
    pf.policy.validate(&inst.problem.instance)?;
    let p = &inst.problem;
    let stream = RandomStream::new(c.seed).child("evaluate");
    let report = evaluate_policy(&p.instance, &pf.policy, &p.flow_model, c.scenarios, &stream, c.workers)?;
    if report.intensity_mismatch {
        eprintln!("warning: evaluation scenarios use autoregressive intensities that training froze");
    }
    eprintln!(
        "mean regret {} over {} scenarios ({} flagged) in {:.0} ms",
        opt_num(report.regret.mean()),
        c.scenarios,
        report.regret.flagged.len(),
        report.wall_ms
    );
    let meta = format!("seed={} instance_hash={}", c.seed, inst.instance_hash);
    if let Some(path) = &c.table {
        let rows: Vec<Vec<String>> = report
            .scenarios
            .iter()
            .map(|s| {
                vec![
                    s.scenario.to_string(),
                    s.stream_path.clone(),
                    num(s.policy_cost),
                    num(s.wait_and_see_cost),
                    opt_num(s.regret),
                ]
            })
            .collect();
        write_table(path, &meta, &["scenario", "stream_path", "policy_cost", "wait_and_see_cost", "regret"], &rows)?;
    }
    if let Some(path) = &c.timing {
        write_timing(path, "step", vec![("evaluate".into(), report.wall_ms)])?;
    }
    let file = EvaluationFile {
        format_version: FORMAT_VERSION,
        units: Units::default(),
        seed: c.seed,
        instance_hash: inst.instance_hash.clone(),
        policy_iterations: pf.iterations,
        report,
    };
    write_json(&c.out, &file)
}

fn sensitivity(c: &SensitivityConfig) -> CliResult<()> {
    let inst = read_instance(&c.instance)?;
    let p = &inst.problem;
    let dimension = match c.dimension {
        DimensionKind::Inflow => {
            let (lo, hi) = c.bounds.unwrap_or(p.flow_bounds);
            SensitivityDimension::Inflow { lo, hi }
        }
        DimensionKind::Spot => {
            let (lo, hi) = c.bounds.unwrap_or(p.flow_model.spot_bounds);
            SensitivityDimension::SpotRate { lo, hi }
        }
    };
    let stream = RandomStream::new(c.seed).child("sensitivity");
    let result = sensitivity_run(&p.instance, &p.nominal, dimension, c.replications, &stream, c.workers)?;
    eprintln!("{} objective: mean {} std {}", dimension.name(), result.summary.mean, result.summary.std);
    if let Some(path) = &c.table {
        let rows: Vec<Vec<String>> =
            result.objectives.iter().enumerate().map(|(r, v)| vec![r.to_string(), num(*v)]).collect();
        let meta = format!("seed={} instance_hash={} dimension={}", c.seed, inst.instance_hash, dimension.name());
        write_table(path, &meta, &["replication", "objective"], &rows)?;
    }
    let file = SensitivityFile {
        format_version: FORMAT_VERSION,
        units: Units::default(),
        seed: c.seed,
        instance_hash: inst.instance_hash.clone(),
        result,
    };
    write_json(&c.out, &file)
}

/// Trains once up to the largest budget and reads every smaller budget off
/// the same run; a run stopped earlier is identical up to that point.
pub fn benchmark_rows(
    problem: &Problem,
    lattice: &ScenarioLattice,
    c: &BenchmarkConfig,
) -> CliResult<(Vec<BenchmarkRow>, Vec<f64>)> {
    let max = *c.budgets.last().expect("validated");
    let rule = StoppingRule::IterationLimit { iterations: max };
    let options = TrainOptions { workers: c.workers, ..Default::default() };
    let (policy, stats) = train_problem(problem, lattice, &rule, c.seed, &options)?;
    let mut rows = Vec::new();
    let mut wall = Vec::new();
    for &b in &c.budgets {
        let metrics = bias_and_ci_at(&stats, b, c.confidence)?;
        let rec = &stats.records[b - 1];
        let mean_regret = if c.eval_scenarios > 0 {
            let p = policy.at_iteration(&stats, b)?;
            let stream = RandomStream::new(c.seed).child("evaluate");
            let report = evaluate_policy(&problem.instance, &p, &problem.flow_model, c.eval_scenarios, &stream, c.workers)?;
            report.regret.mean()
        } else {
            None
        };
        if let Some(w) = &metrics.warning {
            eprintln!("warning at budget {b}: {w}");
        }
        rows.push(BenchmarkRow {
            budget: b,
            iteration_gap_pct: iteration_gap_pct(rec.forward_cost, rec.lower_bound),
            solves: rec.solves,
            metrics,
            mean_regret,
        });
        wall.push(stats.wall_ms[..b].iter().sum());
    }
    Ok((rows, wall))
}

fn benchmark(c: &BenchmarkConfig) -> CliResult<()> {
    let inst = read_instance(&c.instance)?;
    let (lattice, info) = lattice_for(&inst.problem, &c.lattice, c.seed)?;
    let (rows, wall) = benchmark_rows(&inst.problem, &lattice, c)?;
    for (r, w) in rows.iter().zip(&wall) {
        eprintln!(
            "budget {:>5}: bias {:.3}%  ci ratio {:.3}%  wall {:.0} ms",
            r.budget, r.metrics.bias_pct, r.metrics.ci_ratio_pct, w
        );
    }
    if let Some(path) = &c.table {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.budget.to_string(),
                    num(r.metrics.lower_bound),
                    num(r.metrics.upper_bound),
                    num(r.metrics.ci_low),
                    num(r.metrics.ci_high),
                    num(r.metrics.bias_pct),
                    num(r.metrics.ci_ratio_pct),
                    num(r.iteration_gap_pct),
                    r.solves.to_string(),
                    opt_num(r.mean_regret),
                ]
            })
            .collect();
        let meta = format!("seed={} instance_hash={} confidence={}", c.seed, inst.instance_hash, c.confidence);
        write_table(
            path,
            &meta,
            &[
                "budget",
                "lower_bound",
                "upper_bound",
                "ci_low",
                "ci_high",
                "bias_pct",
                "ci_ratio_pct",
                "iteration_gap_pct",
                "solves",
                "mean_regret",
            ],
            &table,
        )?;
    }
    if let Some(path) = &c.timing {
        let t = rows.iter().zip(&wall).map(|(r, w)| (r.budget.to_string(), *w)).collect();
        write_timing(path, "budget", t)?;
    }
    let file = BenchmarkFile {
        format_version: FORMAT_VERSION,
        units: Units::default(),
        seed: c.seed,
        instance_hash: inst.instance_hash.clone(),
        lattice: info,
        confidence: c.confidence,
        eval_scenarios: c.eval_scenarios,
        rows,
    };
    write_json(&c.out, &file)
}
