// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use super::policy::{simulate_path, Policy, Trajectory};
use super::stopping::{check_stopping, RegretEvaluator, StopDecision, StopReason, StoppingRule};
use super::{IterationRecord, TrainingStats};
use crate::error::{Error, Result};
use crate::model::{Instance, SystemState};
use crate::scenario::{LatticeNode, RandomStream, ScenarioLattice};
use crate::stage::{solve_stage, Cut, StageResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    /// Forward trajectories per iteration.
    pub forward_passes: usize,
    /// Always-on iteration cap, conjoined with the stopping rule.
    pub max_iterations: usize,
    /// Threads for the per-realization backward solves. Results do not
    /// depend on this value.
    pub workers: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { forward_passes: 1, max_iterations: 5000, workers: 1 }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.forward_passes == 0 || self.max_iterations == 0 || self.workers == 0 {
            return Err(Error::validation("forward_passes, max_iterations and workers must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn build_pool(workers: usize) -> Result<Option<ThreadPool>> {
    if workers <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map(Some)
        .map_err(|e| Error::Solver(format!("cannot start worker pool: {e}")))
}

/// Solves stage `t` at one incoming state for every lattice node, in node order.
fn solve_nodes(
    instance: &Instance,
    t: usize,
    state: &SystemState,
    nodes: &[LatticeNode],
    cuts: &[Cut],
    pool: Option<&ThreadPool>,
) -> Result<Vec<StageResult>> {
    let one = |n: &LatticeNode| solve_stage(instance, t, state, &n.realization, cuts);
    match pool {
        Some(p) => p.install(|| nodes.par_iter().map(one).collect()),
        None => nodes.iter().map(one).collect(),
    }
}

/// Samples one node per stage and runs the policy along the resulting path.
pub fn forward_pass<R: Rng + ?Sized>(
    instance: &Instance,
    policy: &Policy,
    lattice: &ScenarioLattice,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut nodes = Vec::with_capacity(lattice.horizon());
    let mut path = Vec::with_capacity(lattice.horizon());
    for stage in &lattice.stages {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = stage.len() - 1;
        for (i, n) in stage.iter().enumerate() {
            acc += n.probability;
            if u < acc {
                pick = i;
                break;
            }
        }
        nodes.push(pick);
        path.push(stage[pick].realization.clone());
    }
    let mut traj = simulate_path(instance, policy, &path)?;
    traj.nodes = nodes;
    Ok(traj)
}

/// Adds one averaged cut per stage boundary at the trajectory's states.
/// Returns the number of subproblems solved.
pub fn backward_pass(
    instance: &Instance,
    policy: &mut Policy,
    trajectory: &Trajectory,
    lattice: &ScenarioLattice,
    pool: Option<&ThreadPool>,
) -> Result<usize> {
    let mut solves = 0;
    for t in (1..instance.horizon).rev() {
        let state = &trajectory.states[t];
        let nodes = &lattice.stages[t];
        let results = solve_nodes(instance, t, state, nodes, &policy.cuts[t], pool)
            .map_err(|e| e.context(format!("backward pass at stage {t}")))?;
        solves += results.len();
        let mut value = 0.0;
        let mut gradient = vec![0.0; instance.state_dim()];
        for (n, r) in nodes.iter().zip(&results) {
            value += n.probability * r.total_cost;
            for (g, d) in gradient.iter_mut().zip(&r.state_duals) {
                *g += n.probability * d;
            }
        }
        let s = state.to_vec();
        let intercept = value - gradient.iter().zip(&s).map(|(g, x)| g * x).sum::<f64>();
        policy.cuts[t - 1].push(Cut { stage: t - 1, intercept, gradient });
    }
    Ok(solves)
}

/// Expected stage-0 optimum over the stage-0 nodes plus the initial holding
/// cost. Returns the bound and the number of solves.
pub fn first_stage_bound(
    instance: &Instance,
    policy: &Policy,
    lattice: &ScenarioLattice,
    pool: Option<&ThreadPool>,
) -> Result<(f64, usize)> {
    let nodes = &lattice.stages[0];
    let results = solve_nodes(instance, 0, &instance.initial_state, nodes, &policy.cuts[0], pool)
        .map_err(|e| e.context("first-stage bound"))?;
    let value: f64 = nodes.iter().zip(&results).map(|(n, r)| n.probability * r.total_cost).sum();
    Ok((value + policy.initial_holding, results.len()))
}

/// Trains a policy until `rule` or the iteration cap fires.
pub fn train(
    instance: &Instance,
    lattice: &ScenarioLattice,
    rule: &StoppingRule,
    stream: &RandomStream,
    options: &TrainOptions,
    mut evaluator: Option<&mut dyn RegretEvaluator>,
) -> Result<(Policy, TrainingStats)> {
    instance.validate()?;
    lattice.validate(instance)?;
    if lattice.horizon() != instance.horizon {
        return Err(Error::validation(format!(
            "lattice has {} stages, instance horizon is {}",
            lattice.horizon(),
            instance.horizon
        )));
    }
    rule.validate()?;
    options.validate()?;
    let pool = build_pool(options.workers)?;

    let mut policy = Policy::empty(instance)?;
    policy.metadata.seed = stream.seed;
    policy.metadata.lattice_hash = lattice.hash();
    let mut stats = TrainingStats::default();
    let mut solves = 0;

    for k in 1.. {
        let start = Instant::now();
        let mut trajectories = Vec::with_capacity(options.forward_passes);
        for p in 0..options.forward_passes {
            let mut rng = stream.child("forward").child(k).child(p).rng();
            let traj = forward_pass(instance, &policy, lattice, &mut rng)
                .map_err(|e| e.context(format!("iteration {k}, forward pass {p}")))?;
            solves += traj.solves;
            trajectories.push(traj);
        }
        for traj in &trajectories {
            solves += backward_pass(instance, &mut policy, traj, lattice, pool.as_ref())
                .map_err(|e| e.context(format!("iteration {k}")))?;
        }
        let (bound, n) = first_stage_bound(instance, &policy, lattice, pool.as_ref())?;
        solves += n;
        policy.first_stage_bound = bound;

        let costs: Vec<f64> = trajectories.iter().map(|t| t.total_cost).collect();
        stats.records.push(IterationRecord {
            iteration: k,
            lower_bound: bound,
            forward_cost: costs.iter().sum::<f64>() / costs.len() as f64,
            solves,
            cuts: policy.num_cuts(),
        });
        stats.forward_costs.extend(costs);
        policy.metadata.iterations = k;

        let decision = check_stopping(&mut stats, rule, &policy, evaluator.as_mut().map(|e| &mut **e as &mut dyn RegretEvaluator))?;
        stats.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        let reason = match decision {
            StopDecision::Stop(r) => Some(r),
            StopDecision::Continue if k >= options.max_iterations => Some(StopReason::SafetyLimit),
            StopDecision::Continue => None,
        };
        if let Some(r) = reason {
            stats.stop_reason = Some(r);
            policy.metadata.stop_reason = Some(r.to_string());
            break;
        }
    }
    Ok((policy, stats))
}
