// SPDX-License-Identifier: Apache-2.0

//! Policy evaluation: out-of-sample simulation, wait-and-see optima, regret,
//! bound-gap metrics and one-dimension sensitivity runs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::{holding_cost, Instance, Scenario};
use crate::scenario::{sample_scenario, sample_spot_rates, FlowModel, RandomStream};
use crate::sddp::{build_pool, mean_ci, simulate_path, Policy, RegretEvaluator, TrainingStats};
use crate::stage::{append_stage_block, Incoming, StageLayout};

/// Wait-and-see costs with absolute value below this are not used as a
/// regret denominator.
pub const ZERO_COST_GUARD: f64 = 1e-9;

/// Runs `f` over `0..n`, on `workers` threads when more than one, and
/// returns the results in index order.
fn ordered_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match build_pool(workers)? {
        Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).map(f).collect(),
    }
}

/// Total cost of the policy on every scenario, including the initial holding cost.
pub fn simulate_policy(instance: &Instance, policy: &Policy, scenarios: &[Scenario], workers: usize) -> Result<Vec<f64>> {
    policy.validate(instance)?;
    ordered_map(scenarios.len(), workers, |s| {
        simulate_path(instance, policy, &scenarios[s])
            .map(|t| t.total_cost)
            .map_err(|e| e.context(format!("scenario {s}")))
    })
}

/// The full-horizon LP with one scenario as data, one linked block per stage.
pub fn path_extensive_lp(instance: &Instance, scenario: &Scenario) -> Result<(LinearProgram, Vec<StageLayout>)> {
    if scenario.len() != instance.horizon {
        return Err(Error::validation(format!(
            "scenario has {} stages, instance horizon is {}",
            scenario.len(),
            instance.horizon
        )));
    }
    let mut lp = LinearProgram::new();
    let mut layouts: Vec<StageLayout> = Vec::with_capacity(scenario.len());
    for (t, r) in scenario.iter().enumerate() {
        let incoming = match layouts.last() {
            Some(prev) => Incoming::Linked(prev),
            None => Incoming::Fixed(&instance.initial_state),
        };
        let layout = append_stage_block(&mut lp, instance, t, incoming, r, &[], false)?;
        layouts.push(layout);
    }
    Ok((lp, layouts))
}

/// Optimal cost with the whole scenario known in advance, plus the initial
/// holding cost.
pub fn wait_and_see_cost(instance: &Instance, scenario: &Scenario) -> Result<f64> {
    let (lp, _) = path_extensive_lp(instance, scenario)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective + holding_cost(&instance.initial_state, &instance.cost)?),
        LpStatus::Infeasible => Err(Error::Infeasible(
            "full-horizon LP has no feasible plan; hub and carrier capacities cannot absorb these flows".into(),
        )),
        LpStatus::Unbounded => Err(Error::Solver("full-horizon LP is unbounded".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub std: f64,
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
}

impl Dispersion {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("no values to summarize"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let constant = values.iter().all(|&v| v == values[0]);
        let std = if values.len() < 2 || constant {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let mut data = Data::new(values.to_vec());
        Ok(Dispersion {
            mean,
            std,
            min: data.quantile(0.0),
            q05: data.quantile(0.05),
            median: data.quantile(0.5),
            q95: data.quantile(0.95),
            max: data.quantile(1.0),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretSummary {
    /// Relative regret per scenario; `None` where the wait-and-see cost is zero.
    pub values: Vec<Option<f64>>,
    pub flagged: Vec<usize>,
    /// Statistics over the unflagged scenarios.
    pub stats: Option<Dispersion>,
}

impl RegretSummary {
    pub fn mean(&self) -> Option<f64> {
        self.stats.as_ref().map(|s| s.mean)
    }
}

/// Relative regret `(policy - wait_and_see) / wait_and_see` per scenario.
pub fn regret(policy_costs: &[f64], wait_and_see: &[f64]) -> Result<RegretSummary> {
    if policy_costs.len() != wait_and_see.len() {
        return Err(Error::validation(format!(
            "{} policy costs against {} wait-and-see costs",
            policy_costs.len(),
            wait_and_see.len()
        )));
    }
    let mut flagged = Vec::new();
    let values: Vec<Option<f64>> = policy_costs
        .iter()
        .zip(wait_and_see)
        .enumerate()
        .map(|(s, (&p, &w))| {
            if w.abs() < ZERO_COST_GUARD {
                flagged.push(s);
                None
            } else {
                Some((p - w) / w)
            }
        })
        .collect();
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    let stats = if kept.is_empty() { None } else { Some(Dispersion::of(&kept)?) };
    Ok(RegretSummary { values, flagged, stats })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasCi {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bias_pct: f64,
    pub ci_ratio_pct: f64,
    pub samples: usize,
    /// Set when the lower bound exceeds the upper confidence edge.
    pub warning: Option<String>,
}

/// Bound gap after `iteration`: the upper bound is the mean of all forward
/// costs sampled so far during training.
pub fn bias_and_ci_at(stats: &TrainingStats, iteration: usize, confidence: f64) -> Result<BiasCi> {
    if iteration == 0 || iteration > stats.iterations() {
        return Err(Error::validation(format!(
            "iteration {iteration} outside the {} recorded iterations",
            stats.iterations()
        )));
    }
    let ci = mean_ci(stats.forward_costs_upto(iteration), confidence)?;
    let lb = stats.records[iteration - 1].lower_bound;
    let ub = ci.mean;
    let warning = (lb > ci.high).then(|| {
        format!("lower bound {lb} above the upper confidence edge {}; simulation sample too small", ci.high)
    });
    Ok(BiasCi {
        iteration,
        lower_bound: lb,
        upper_bound: ub,
        ci_low: ci.low,
        ci_high: ci.high,
        bias_pct: 100.0 * (ub - lb) / ub,
        ci_ratio_pct: 100.0 * (ci.high - ci.low) / ub,
        samples: ci.n,
        warning,
    })
}

/// [`bias_and_ci_at`] after the last recorded iteration.
pub fn bias_and_ci(stats: &TrainingStats, confidence: f64) -> Result<BiasCi> {
    bias_and_ci_at(stats, stats.iterations(), confidence)
}

/// Relative gap between one iteration's forward cost and its lower bound, in percent.
pub fn iteration_gap_pct(forward_cost: f64, lower_bound: f64) -> f64 {
    if forward_cost.abs() < ZERO_COST_GUARD {
        0.0
    } else {
        100.0 * (forward_cost - lower_bound) / forward_cost
    }
}

/// Out-of-sample scenarios drawn from the simulation model, with their
/// stream paths.
pub fn sample_scenarios(
    instance: &Instance,
    model: &FlowModel,
    count: usize,
    stream: &RandomStream,
) -> Result<Vec<(String, Scenario)>> {
    (0..count)
        .map(|s| {
            let sub = stream.child("scenario").child(s);
            Ok((sub.path_string(), sample_scenario(instance, model, &sub)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvaluation {
    pub scenario: usize,
    pub stream_path: String,
    pub policy_cost: f64,
    pub wait_and_see_cost: f64,
    pub regret: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub scenarios: Vec<ScenarioEvaluation>,
    pub regret: RegretSummary,
    pub policy_cost: Dispersion,
    pub wait_and_see_cost: Dispersion,
    /// True when the evaluation scenarios follow autoregressive intensities
    /// while the training lattice froze them.
    pub intensity_mismatch: bool,
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Simulates the policy on `count` out-of-sample scenarios and compares it
/// with the wait-and-see optimum of each.
pub fn evaluate_policy(
    instance: &Instance,
    policy: &Policy,
    model: &FlowModel,
    count: usize,
    stream: &RandomStream,
    workers: usize,
) -> Result<EvaluationReport> {
    let start = std::time::Instant::now();
    let sampled = sample_scenarios(instance, model, count, stream)?;
    let scenarios: Vec<Scenario> = sampled.iter().map(|(_, s)| s.clone()).collect();
    let policy_costs = simulate_policy(instance, policy, &scenarios, workers)?;
    let ws = ordered_map(scenarios.len(), workers, |s| {
        wait_and_see_cost(instance, &scenarios[s]).map_err(|e| e.context(format!("scenario {s}")))
    })?;
    let regret = regret(&policy_costs, &ws)?;
    let rows = sampled
        .into_iter()
        .enumerate()
        .map(|(s, (path, _))| ScenarioEvaluation {
            scenario: s,
            stream_path: path,
            policy_cost: policy_costs[s],
            wait_and_see_cost: ws[s],
            regret: regret.values[s],
        })
        .collect();
    Ok(EvaluationReport {
        seed: stream.seed,
        scenarios: rows,
        policy_cost: Dispersion::of(&policy_costs)?,
        wait_and_see_cost: Dispersion::of(&ws)?,
        regret,
        intensity_mismatch: model.intensity.is_autoregressive(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Regret evaluator over a fixed out-of-sample pool; wait-and-see costs are
/// computed once per scenario.
pub struct PoolRegret<'a> {
    instance: &'a Instance,
    scenarios: Vec<Scenario>,
    wait_and_see: Vec<Option<f64>>,
    workers: usize,
}

impl<'a> PoolRegret<'a> {
    pub fn new(instance: &'a Instance, scenarios: Vec<Scenario>, workers: usize) -> Self {
        let n = scenarios.len();
        PoolRegret { instance, scenarios, wait_and_see: vec![None; n], workers }
    }

    pub fn sampled(instance: &'a Instance, model: &FlowModel, count: usize, stream: &RandomStream, workers: usize) -> Result<Self> {
        let scenarios = sample_scenarios(instance, model, count, stream)?.into_iter().map(|(_, s)| s).collect();
        Ok(Self::new(instance, scenarios, workers))
    }
}

impl RegretEvaluator for PoolRegret<'_> {
    fn mean_regret(&mut self, policy: &Policy, scenarios: usize) -> Result<f64> {
        if scenarios > self.scenarios.len() {
            return Err(Error::validation(format!(
                "regret check wants {scenarios} scenarios, pool has {}",
                self.scenarios.len()
            )));
        }
        let pool = &self.scenarios[..scenarios];
        let missing: Vec<usize> = (0..scenarios).filter(|&s| self.wait_and_see[s].is_none()).collect();
        let fresh = ordered_map(missing.len(), self.workers, |k| wait_and_see_cost(self.instance, &pool[missing[k]]))?;
        for (s, w) in missing.into_iter().zip(fresh) {
            self.wait_and_see[s] = Some(w);
        }
        let ws: Vec<f64> = self.wait_and_see[..scenarios].iter().map(|w| w.expect("filled above")).collect();
        let costs = simulate_policy(self.instance, policy, pool, self.workers)?;
        regret(&costs, &ws)?
            .mean()
            .ok_or_else(|| Error::validation("every wait-and-see cost in the regret pool is zero"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dimension", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SensitivityDimension {
    /// Every inflow resampled i.i.d. uniform on `[lo, hi]`.
    Inflow { lo: f64, hi: f64 },
    /// Every spot rate resampled i.i.d. uniform on `[lo, hi]`.
    SpotRate { lo: f64, hi: f64 },
}

impl SensitivityDimension {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            SensitivityDimension::Inflow { lo, hi } | SensitivityDimension::SpotRate { lo, hi } => (lo, hi),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SensitivityDimension::Inflow { .. } => "inflow",
            SensitivityDimension::SpotRate { .. } => "spot",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub dimension: SensitivityDimension,
    pub objectives: Vec<f64>,
    pub summary: Dispersion,
}

/// Resamples one dimension of `base` `replications` times, holding the rest
/// fixed, and solves the full-horizon LP for each replication.
pub fn sensitivity_run(
    instance: &Instance,
    base: &Scenario,
    dimension: SensitivityDimension,
    replications: usize,
    stream: &RandomStream,
    workers: usize,
) -> Result<SensitivityResult> {
    if replications < 2 {
        return Err(Error::validation("sensitivity analysis needs at least 2 replications"));
    }
    let (lo, hi) = dimension.bounds();
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::validation(format!("sampling interval [{lo}, {hi}] must be ordered and nonnegative")));
    }
    let objectives = ordered_map(replications, workers, |r| {
        let sub = stream.child(dimension.name()).child(r);
        let mut scenario = base.clone();
        for (t, stage) in scenario.iter_mut().enumerate() {
            let mut rng = sub.child(t).rng();
            match dimension {
                SensitivityDimension::Inflow { .. } => {
                    for q in &mut stage.inflow {
                        *q = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                    }
                }
                SensitivityDimension::SpotRate { .. } => {
                    stage.spot_rate = sample_spot_rates(instance, &mut rng, lo, hi);
                }
            }
        }
        wait_and_see_cost(instance, &scenario).map_err(|e| e.context(format!("replication {r}")))
    })?;
    let summary = Dispersion::of(&objectives)?;
    Ok(SensitivityResult { dimension, objectives, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_arithmetic() {
        let r = regret(&[110.0], &[100.0]).unwrap();
        assert!((r.values[0].unwrap() - 0.10).abs() < 1e-15);
        let r = regret(&[5.0, 7.0], &[5.0, 7.0]).unwrap();
        assert!(r.values.iter().all(|v| *v == Some(0.0)));
        assert!(regret(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_wait_and_see_is_flagged() {
        let r = regret(&[0.0, 11.0], &[0.0, 10.0]).unwrap();
        assert_eq!(r.flagged, vec![0]);
        assert_eq!(r.values[0], None);
        assert!((r.mean().unwrap() - 0.1).abs() < 1e-12);
        let r = regret(&[0.0], &[0.0]).unwrap();
        assert!(r.mean().is_none());
    }

    fn stats(lbs: &[f64], costs: &[f64]) -> TrainingStats {
        use crate::sddp::IterationRecord;
        TrainingStats {
            records: lbs
                .iter()
                .zip(costs)
                .enumerate()
                .map(|(i, (&lb, &c))| IterationRecord { iteration: i + 1, lower_bound: lb, forward_cost: c, solves: 0, cuts: 0 })
                .collect(),
            forward_costs: costs.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn bias_definition() {
        let s = stats(&[100.0, 100.0], &[135.5, 135.5]);
        let b = bias_and_ci(&s, 0.95).unwrap();
        assert!((b.bias_pct - 26.199261992619927).abs() < 1e-9);
        assert_eq!(b.ci_ratio_pct, 0.0);
        let s = stats(&[50.0, 50.0], &[50.0, 50.0]);
        assert_eq!(bias_and_ci(&s, 0.95).unwrap().bias_pct, 0.0);
        assert!(bias_and_ci(&stats(&[1.0], &[1.0]), 0.95).is_err());
    }

    #[test]
    fn bias_is_scale_invariant() {
        let a = bias_and_ci(&stats(&[80.0, 90.0, 95.0], &[130.0, 110.0, 100.0]), 0.95).unwrap();
        let b = bias_and_ci(&stats(&[800.0, 900.0, 950.0], &[1300.0, 1100.0, 1000.0]), 0.95).unwrap();
        assert!((a.bias_pct - b.bias_pct).abs() < 1e-12);
        assert!((a.ci_ratio_pct - b.ci_ratio_pct).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_above_ci_warns() {
        let b = bias_and_ci(&stats(&[10.0, 20.0], &[10.0, 10.0]), 0.95).unwrap();
        assert!(b.warning.is_some());
    }

    #[test]
    fn dispersion_of_constant() {
        let d = Dispersion::of(&[3.0; 5]).unwrap();
        assert_eq!((d.mean, d.std, d.min, d.max), (3.0, 0.0, 3.0, 3.0));
        let d = Dispersion::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d.median, 3.0);
        assert!((d.std - 2.5f64.sqrt()).abs() < 1e-12);
    }
}
