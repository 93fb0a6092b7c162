// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Policy, RegretCheck, TrainingStats};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StoppingRule {
    IterationLimit {
        iterations: usize,
    },
    /// Relative bound improvement over the last `window` iterations below `tolerance`.
    BoundStall {
        window: usize,
        tolerance: f64,
    },
    /// Lower CI edge of the recent forward costs within `gap` (relative) of the bound.
    SimulationGap {
        confidence: f64,
        gap: f64,
        /// Number of most recent forward costs forming the upper-bound sample.
        window: usize,
    },
    /// Mean out-of-sample regret improved by less than `improvement` between
    /// two checks `period` iterations apart, each over `scenarios` scenarios.
    AdaptiveRegret {
        period: usize,
        scenarios: usize,
        improvement: f64,
    },
}

impl StoppingRule {
    pub fn adaptive_regret_default() -> Self {
        StoppingRule::AdaptiveRegret { period: 25, scenarios: 100, improvement: 0.002 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StoppingRule::IterationLimit { iterations } => iterations > 0,
            StoppingRule::BoundStall { window, tolerance } => window > 0 && tolerance > 0.0,
            StoppingRule::SimulationGap { confidence, gap, window } => {
                confidence > 0.0 && confidence < 1.0 && gap > 0.0 && window >= 2
            }
            StoppingRule::AdaptiveRegret { period, scenarios, improvement } => {
                period > 0 && scenarios > 0 && improvement > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("stopping rule parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    IterationLimit,
    BoundStall,
    SimulationGap,
    AdaptiveRegret,
    /// The always-on iteration cap was reached first.
    SafetyLimit,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::IterationLimit => "iteration-limit",
            StopReason::BoundStall => "bound-stall",
            StopReason::SimulationGap => "simulation-gap",
            StopReason::AdaptiveRegret => "adaptive-regret",
            StopReason::SafetyLimit => "safety-limit",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(StopReason),
}

/// Mean out-of-sample regret of a policy, supplied by the caller.
pub trait RegretEvaluator {
    fn mean_regret(&mut self, policy: &Policy, scenarios: usize) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    pub n: usize,
}

/// Sample mean with a two-sided normal-approximation confidence interval.
pub fn mean_ci(samples: &[f64], confidence: f64) -> Result<MeanCi> {
    if samples.len() < 2 {
        return Err(Error::validation("confidence interval needs at least 2 samples"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::validation(format!("confidence level {confidence} outside (0, 1)")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.iter().all(|&x| x == samples[0]) {
        0.0
    } else {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let half = z * (var / n).sqrt();
    Ok(MeanCi { mean, low: mean - half, high: mean + half, n: samples.len() })
}

/// Decides whether training stops after the latest recorded iteration.
///
/// For the adaptive regret rule this runs the evaluator on check iterations
/// and appends the result to `stats.regret_checks`.
pub fn check_stopping(
    stats: &mut TrainingStats,
    rule: &StoppingRule,
    policy: &Policy,
    evaluator: Option<&mut dyn RegretEvaluator>,
) -> Result<StopDecision> {
    let Some(last) = stats.last() else {
        return Err(Error::validation("no iterations recorded"));
    };
    let k = last.iteration;
    let lb = last.lower_bound;
    let stop = match *rule {
        StoppingRule::IterationLimit { iterations } => k >= iterations,
        StoppingRule::BoundStall { window, tolerance } => {
            k > window && {
                let old = stats.records[k - 1 - window].lower_bound;
                (lb - old) < tolerance * lb.abs().max(1e-12)
            }
        }
        StoppingRule::SimulationGap { confidence, gap, window } => {
            let n = stats.forward_costs.len();
            n >= window && {
                let ci = mean_ci(&stats.forward_costs[n - window..], confidence)?;
                (ci.low - lb) < gap * ci.mean.abs().max(1e-12)
            }
        }
        StoppingRule::AdaptiveRegret { period, scenarios, improvement } => {
            if k % period != 0 {
                false
            } else {
                let eval = evaluator
                    .ok_or_else(|| Error::validation("adaptive regret rule needs a regret evaluator"))?;
                let mean_regret = eval.mean_regret(policy, scenarios)?;
                stats.regret_checks.push(RegretCheck { iteration: k, mean_regret });
                let c = &stats.regret_checks;
                c.len() >= 2 && c[c.len() - 2].mean_regret - mean_regret < improvement
            }
        }
    };
    let reason = match rule {
        StoppingRule::IterationLimit { .. } => StopReason::IterationLimit,
        StoppingRule::BoundStall { .. } => StopReason::BoundStall,
        StoppingRule::SimulationGap { .. } => StopReason::SimulationGap,
        StoppingRule::AdaptiveRegret { .. } => StopReason::AdaptiveRegret,
    };
    Ok(if stop { StopDecision::Stop(reason) } else { StopDecision::Continue })
}
