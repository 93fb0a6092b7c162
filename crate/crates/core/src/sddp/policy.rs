// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{holding_cost, Decision, Instance, StageRealization, SystemState};
use crate::stage::{solve_stage, Cut};
use super::TrainingStats;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyMetadata {
    pub iterations: usize,
    pub seed: u64,
    pub lattice_hash: String,
    pub instance_hash: String,
    #[serde(default)]
    pub stop_reason: Option<String>,
}

/// Cut collections on the cost-to-go after every stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    /// `cuts[t]` bounds the expected cost of stages `t+1..` as a function of
    /// the state leaving stage `t`. The last stage never gets cuts.
    pub cuts: Vec<Vec<Cut>>,
    /// Lower bound on the expected total cost, including the initial holding cost.
    pub first_stage_bound: f64,
    /// Holding cost of the initial state, a decision-independent constant.
    pub initial_holding: f64,
    pub metadata: PolicyMetadata,
}

impl Policy {
    pub fn empty(instance: &Instance) -> Result<Self> {
        let initial_holding = holding_cost(&instance.initial_state, &instance.cost)?;
        Ok(Policy {
            cuts: vec![Vec::new(); instance.horizon],
            first_stage_bound: initial_holding,
            initial_holding,
            metadata: PolicyMetadata { instance_hash: instance.hash(), ..Default::default() },
        })
    }

    pub fn num_cuts(&self) -> usize {
        self.cuts.iter().map(Vec::len).sum()
    }

    /// Checks that the cut layout fits `instance`.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.cuts.len() != instance.horizon {
            return Err(Error::validation(format!(
                "policy has {} stages, instance horizon is {}",
                self.cuts.len(),
                instance.horizon
            )));
        }
        for (t, cuts) in self.cuts.iter().enumerate() {
            for c in cuts {
                if c.stage != t || c.gradient.len() != instance.state_dim() {
                    return Err(Error::validation(format!("malformed cut in stage {t}")));
                }
                if !c.intercept.is_finite() || c.gradient.iter().any(|g| !g.is_finite()) {
                    return Err(Error::validation(format!("non-finite cut coefficient in stage {t}")));
                }
            }
        }
        Ok(())
    }

    /// The policy as it stood after `iteration` iterations of the training
    /// run that produced `stats`. Cuts are appended in iteration order, so
    /// this equals a run stopped at `iteration`.
    pub fn at_iteration(&self, stats: &TrainingStats, iteration: usize) -> Result<Policy> {
        if iteration == 0 || iteration > stats.iterations() || iteration > self.metadata.iterations {
            return Err(Error::validation(format!(
                "iteration {iteration} outside the {} trained iterations",
                self.metadata.iterations.min(stats.iterations())
            )));
        }
        let per_iter = stats.forward_costs.len() / stats.iterations();
        let keep = iteration * per_iter;
        let mut p = self.clone();
        for cuts in &mut p.cuts {
            cuts.truncate(keep);
        }
        p.first_stage_bound = stats.records[iteration - 1].lower_bound;
        p.metadata.iterations = iteration;
        p.metadata.stop_reason = None;
        Ok(p)
    }

    /// Largest cut value at `state` for stage `t`, or 0 without cuts.
    pub fn cost_to_go(&self, t: usize, state: &[f64]) -> f64 {
        self.cuts[t].iter().map(|c| c.value_at(state)).fold(0.0, f64::max)
    }
}

/// Result of running a policy along one path.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// `states[0]` is the initial state; `states[t+1]` leaves stage `t`.
    pub states: Vec<SystemState>,
    pub decisions: Vec<Decision>,
    pub stage_costs: Vec<f64>,
    /// Index of the lattice node visited at every stage, when sampled from a lattice.
    pub nodes: Vec<usize>,
    /// Sum of stage costs plus the initial holding cost.
    pub total_cost: f64,
    pub solves: usize,
}

/// Runs the policy along a fixed path without learning.
pub fn simulate_path(instance: &Instance, policy: &Policy, path: &[StageRealization]) -> Result<Trajectory> {
    if path.len() != instance.horizon {
        return Err(Error::validation(format!(
            "path has {} stages, instance horizon is {}",
            path.len(),
            instance.horizon
        )));
    }
    let mut state = instance.initial_state.clone();
    let mut traj = Trajectory {
        states: vec![state.clone()],
        decisions: Vec::with_capacity(path.len()),
        stage_costs: Vec::with_capacity(path.len()),
        nodes: Vec::new(),
        total_cost: policy.initial_holding,
        solves: 0,
    };
    for (t, r) in path.iter().enumerate() {
        let res = solve_stage(instance, t, &state, r, &policy.cuts[t])?;
        traj.solves += 1;
        traj.total_cost += res.stage_cost;
        traj.stage_costs.push(res.stage_cost);
        traj.decisions.push(res.decision);
        state = res.outgoing_state;
        traj.states.push(state.clone());
    }
    Ok(traj)
}
