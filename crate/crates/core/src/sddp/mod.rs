// SPDX-License-Identifier: Apache-2.0

//! Stochastic dual dynamic programming over a stagewise-independent lattice.
//!
//! One iteration is a forward pass (sample a path, solve every stage with the
//! current cuts) followed by a backward pass that adds one averaged cut per
//! stage. The lower bound is the expected stage-0 optimum plus the holding
//! cost of the initial state.

mod policy;
mod stopping;
mod train;

pub use policy::{simulate_path, Policy, PolicyMetadata, Trajectory};
pub use stopping::{check_stopping, mean_ci, MeanCi, RegretEvaluator, StopDecision, StopReason, StoppingRule};
pub(crate) use train::build_pool;
pub use train::{backward_pass, first_stage_bound, forward_pass, train, TrainOptions};

use serde::{Deserialize, Serialize};

/// Largest tolerated decrease of the lower bound between iterations.
pub const BOUND_MONOTONE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub lower_bound: f64,
    /// Mean total cost of this iteration's forward trajectories.
    pub forward_cost: f64,
    /// Stage subproblem solves so far, including bound evaluations.
    pub solves: usize,
    pub cuts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretCheck {
    pub iteration: usize,
    pub mean_regret: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingStats {
    pub records: Vec<IterationRecord>,
    /// Every forward trajectory cost in the order it was sampled.
    pub forward_costs: Vec<f64>,
    pub regret_checks: Vec<RegretCheck>,
    /// Wall time per iteration in milliseconds. Kept out of the
    /// deterministic outputs.
    #[serde(skip)]
    pub wall_ms: Vec<f64>,
    pub stop_reason: Option<StopReason>,
}

impl TrainingStats {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Forward costs sampled up to and including `iteration`.
    pub fn forward_costs_upto(&self, iteration: usize) -> &[f64] {
        let per_iter = if self.records.is_empty() { 0 } else { self.forward_costs.len() / self.records.len() };
        &self.forward_costs[..(iteration * per_iter).min(self.forward_costs.len())]
    }

    /// Largest drop of the lower bound between consecutive iterations.
    pub fn max_bound_decrease(&self) -> f64 {
        self.records.windows(2).map(|w| w[0].lower_bound - w[1].lower_bound).fold(0.0, f64::max)
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.wall_ms.iter().sum()
    }
}
